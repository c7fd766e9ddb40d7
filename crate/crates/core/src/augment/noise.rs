//! Token-level noise: drop, replace, then displace, each hitting a fixed share
//! `r` of the tokens present when the stage starts.

use indexmap::IndexSet;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

/// Token types available to the replacement stage, in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    types: Vec<String>,
    side: Side,
}

impl Vocabulary {
    /// Rejects duplicate types.
    pub fn new(types: Vec<String>, side: Side) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(types.len());
        for t in &types {
            if !seen.insert(t.as_str()) {
                return Err(Error::Validation(format!("duplicate vocabulary type {t:?}")));
            }
        }
        Ok(Vocabulary { types, side })
    }

    /// All whitespace-token types of `texts`.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, side: Side) -> Self {
        let set: IndexSet<&str> = texts.into_iter().flat_map(str::split_whitespace).collect();
        Vocabulary {
            types: set.into_iter().map(str::to_string).collect(),
            side,
        }
    }

    /// One type per non-blank line.
    pub fn parse(text: &str, side: Side) -> Result<Self> {
        let types = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        Vocabulary::new(types, side)
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseParams<'a> {
    pub r: f64,
    pub seed: u64,
    pub vocab: Option<&'a Vocabulary>,
}

/// One applied noise operation. Positions refer to the sequence as it was
/// immediately before the operation (drops refer to the pre-drop sequence).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum NoiseOp {
    Drop { pos: usize, token: String },
    Replace { pos: usize, from: String, to: String },
    Displace { from: usize, to: usize, token: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Noised {
    pub tokens: Vec<String>,
    pub ops: Vec<NoiseOp>,
}

/// `round(r * n)` with halves rounded up.
pub fn noise_count(r: f64, n: usize) -> usize {
    // the epsilon absorbs products like 0.15 * 10 = 1.4999999999999998
    let c = (r * n as f64 + 0.5 + 1e-9).floor() as usize;
    c.min(n)
}

pub fn validate_ratio(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Parameter(format!("noise ratio {r} outside [0, 1]")));
    }
    Ok(())
}

/// Runs the three noise stages over `tokens` with randomness from `params.seed`.
pub fn apply_noise<S: AsRef<str>>(tokens: &[S], params: &NoiseParams<'_>) -> Result<Noised> {
    validate_ratio(params.r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut toks: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
    let mut ops = Vec::new();

    let drops = noise_count(params.r, toks.len());
    let mut drop_pos = index::sample(&mut rng, toks.len(), drops).into_vec();
    drop_pos.sort_unstable();
    toks = drop_stage(&toks, &drop_pos, &mut ops);

    let replaces = noise_count(params.r, toks.len());
    if replaces > 0 {
        let vocab = params
            .vocab
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::Parameter("replacement noise needs a non-empty vocabulary".into()))?;
        let mut pos = index::sample(&mut rng, toks.len(), replaces).into_vec();
        pos.sort_unstable();
        for p in pos {
            let to = vocab.types[rng.gen_range(0..vocab.len())].clone();
            let from = std::mem::replace(&mut toks[p], to.clone());
            ops.push(NoiseOp::Replace { pos: p, from, to });
        }
    }

    let moves = noise_count(params.r, toks.len());
    if moves > 0 {
        // track tokens by their index at stage start so each is moved once
        let chosen = index::sample(&mut rng, toks.len(), moves).into_vec();
        let mut tagged: Vec<(usize, String)> = toks.into_iter().enumerate().collect();
        for id in chosen {
            let from = tagged.iter().position(|(t, _)| *t == id).expect("tracked token");
            let item = tagged.remove(from);
            let to = rng.gen_range(0..=tagged.len());
            ops.push(NoiseOp::Displace {
                from,
                to,
                token: item.1.clone(),
            });
            tagged.insert(to, item);
        }
        toks = tagged.into_iter().map(|(_, t)| t).collect();
    }

    Ok(Noised { tokens: toks, ops })
}

fn drop_stage(tokens: &[String], sorted_pos: &[usize], ops: &mut Vec<NoiseOp>) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len() - sorted_pos.len());
    let mut next = sorted_pos.iter().peekable();
    for (i, t) in tokens.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            ops.push(NoiseOp::Drop {
                pos: i,
                token: t.clone(),
            });
        } else {
            out.push(t.clone());
        }
    }
    out
}

/// Replays a log produced by [`apply_noise`] (or written by hand).
pub fn replay<S: AsRef<str>>(tokens: &[S], ops: &[NoiseOp]) -> Result<Vec<String>> {
    let mut toks: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
    let drops: Vec<usize> = ops
        .iter()
        .filter_map(|op| match op {
            NoiseOp::Drop { pos, .. } => Some(*pos),
            _ => None,
        })
        .collect();
    let mut sorted = drops.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != drops.len() || sorted.last().is_some_and(|&p| p >= toks.len()) {
        return Err(Error::Validation("drop positions must be distinct and in range".into()));
    }
    for &p in sorted.iter().rev() {
        toks.remove(p);
    }
    for op in ops {
        match op {
            NoiseOp::Drop { .. } => {}
            NoiseOp::Replace { pos, to, .. } => {
                let slot = toks
                    .get_mut(*pos)
                    .ok_or_else(|| Error::Validation(format!("replace position {pos} out of range")))?;
                *slot = to.clone();
            }
            NoiseOp::Displace { from, to, .. } => {
                if *from >= toks.len() || *to >= toks.len() {
                    return Err(Error::Validation(format!(
                        "displacement {from}->{to} out of range"
                    )));
                }
                let t = toks.remove(*from);
                toks.insert(*to, t);
            }
        }
    }
    Ok(toks)
}
