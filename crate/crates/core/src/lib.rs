//! Code-switching robustness tooling for multilingual machine translation corpora.
//!
//! The crate builds evaluation check sets ([`checks`]) and training augmentations
//! ([`augment`]) from parallel and multi-parallel corpora ([`corpus`]), measures
//! cross-attention bleed on exported attention tensors ([`attnbleed`]), and
//! scores hypotheses with corpus BLEU ([`scoring`]).
//!
//! Every randomized generator is a pure function of its inputs and an explicit
//! seed, so the same call always yields byte-identical output.

pub mod attnbleed;
pub mod augment;
pub mod checks;
pub mod corpus;
mod error;
pub mod rng;
pub mod scoring;
pub mod segment;

pub use error::{Error, Result};
