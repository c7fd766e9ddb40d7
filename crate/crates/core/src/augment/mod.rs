//! Training-data augmentation: sentence concatenation and noised copies.
//!
//! Generators draw with replacement from the pooled sentences of every input
//! corpus and emit exactly `budget` segments. Record `o` takes its randomness
//! from [`segment_rng`]`(seed, o)`, so records are built in parallel and merged
//! by ordinal.

pub mod noise;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{LangCode, ParallelCorpus};
use crate::rng::{derive_seed, sample_sorted, segment_rng, SegmentRng};
use crate::segment::{segment_id, AugmentKind, GeneratedSegment, SegmentKind, SPACE};
use crate::{Error, Result};

use noise::{apply_noise, validate_ratio, NoiseParams, Side, Vocabulary};

/// Noise ratio used when none is given.
pub const DEFAULT_NOISE_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    pub budget: usize,
    pub seed: u64,
    /// Noise ratio for the noise kinds.
    pub noise_r: f64,
    /// Replacement vocabulary; defaults to the types of the noised side.
    pub vocab: Option<Vocabulary>,
    /// Concatenation kinds join between 2 and `max_joins` sentences.
    pub max_joins: usize,
    pub join: String,
    /// Language tag for target-side material placed on the source side.
    pub target_lang: LangCode,
}

impl AugmentSpec {
    pub fn new(kind: AugmentKind, budget: usize, seed: u64) -> Self {
        AugmentSpec {
            kind,
            budget,
            seed,
            noise_r: DEFAULT_NOISE_RATIO,
            vocab: None,
            max_joins: 2,
            join: SPACE.to_string(),
            target_lang: LangCode::new("en").expect("valid code"),
        }
    }

    pub fn with_noise(mut self, r: f64) -> Self {
        self.noise_r = r;
        self
    }

    pub fn with_max_joins(mut self, max_joins: usize) -> Self {
        self.max_joins = max_joins;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Parameter("budget must be at least 1".into()));
        }
        if !(2..=4).contains(&self.max_joins) {
            return Err(Error::Parameter(format!(
                "max_joins must be in [2, 4], got {}",
                self.max_joins
            )));
        }
        validate_ratio(self.noise_r)
    }

    fn kind(&self) -> SegmentKind {
        SegmentKind::Augment(self.kind)
    }

    fn draw_joins(&self, rng: &mut SegmentRng) -> usize {
        rng.gen_range(2..=self.max_joins)
    }
}

/// `(corpus index, pair index)` of a drawn sentence.
pub type Draw = (usize, usize);

struct Pool {
    /// Prefix sums of corpus sizes.
    offsets: Vec<usize>,
}

impl Pool {
    fn new(corpora: &[ParallelCorpus]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(corpora.len() + 1);
        offsets.push(0);
        for c in corpora {
            offsets.push(offsets.last().unwrap() + c.len());
        }
        if *offsets.last().unwrap() == 0 {
            return Err(Error::EmptyOutput(
                "augmentation needs at least one sentence pair".into(),
            ));
        }
        Ok(Pool { offsets })
    }

    fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn locate(&self, flat: usize) -> Draw {
        let c = self.offsets.partition_point(|&o| o <= flat) - 1;
        (c, flat - self.offsets[c])
    }

    fn draw(&self, rng: &mut SegmentRng) -> Draw {
        self.locate(rng.gen_range(0..self.total()))
    }
}

fn check_draw(corpora: &[ParallelCorpus], (c, i): Draw) -> Result<()> {
    if corpora.get(c).is_none_or(|corpus| i >= corpus.len()) {
        return Err(Error::Parameter(format!("draw ({c}, {i}) is out of range")));
    }
    Ok(())
}

/// Concatenates the drawn pairs on both sides.
pub fn concat_at(
    corpora: &[ParallelCorpus],
    draws: &[Draw],
    spec: &AugmentSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    for &d in draws {
        check_draw(corpora, d)?;
    }
    let src: Vec<&str> = draws.iter().map(|&(c, i)| corpora[c].pairs[i].0.as_str()).collect();
    let tgt: Vec<&str> = draws.iter().map(|&(c, i)| corpora[c].pairs[i].1.as_str()).collect();
    let langs = draws.iter().map(|&(c, _)| corpora[c].lang.clone()).collect();
    Ok(GeneratedSegment::joined(
        spec.kind(),
        spec.seed,
        ordinal,
        &src,
        langs,
        &tgt,
        &spec.join,
    ))
}

fn generate_concat<F>(corpora: &[ParallelCorpus], spec: &AugmentSpec, draw: F) -> Result<Vec<GeneratedSegment>>
where
    F: Fn(&mut SegmentRng) -> Vec<Draw> + Sync,
{
    (0..spec.budget)
        .into_par_iter()
        .map(|ord| {
            let mut rng = segment_rng(spec.seed, ord as u64);
            concat_at(corpora, &draw(&mut rng), spec, ord)
        })
        .collect()
}

/// CatSL: distinct random sentences of one language.
pub fn cat_sl(corpora: &[ParallelCorpus], spec: &AugmentSpec) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    Pool::new(corpora)?;
    // a language qualifies when it can supply `max_joins` distinct sentences
    let sizes: Vec<usize> = corpora
        .iter()
        .map(|c| if c.len() >= spec.max_joins { c.len() } else { 0 })
        .collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Precondition(format!(
            "CatSL needs a language with at least {} sentence pairs",
            spec.max_joins
        )));
    }
    generate_concat(corpora, spec, |rng| {
        let joins = spec.draw_joins(rng);
        let mut flat = rng.gen_range(0..total);
        let mut c = 0;
        while flat >= sizes[c] {
            flat -= sizes[c];
            c += 1;
        }
        index::sample(rng, corpora[c].len(), joins)
            .into_iter()
            .map(|i| (c, i))
            .collect()
    })
}

/// CatXL: independent random sentences from any language.
pub fn cat_xl(corpora: &[ParallelCorpus], spec: &AugmentSpec) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    let pool = Pool::new(corpora)?;
    generate_concat(corpora, spec, |rng| {
        let joins = spec.draw_joins(rng);
        (0..joins).map(|_| pool.draw(rng)).collect()
    })
}

/// CatRepeat: one random sentence repeated.
pub fn cat_repeat(corpora: &[ParallelCorpus], spec: &AugmentSpec) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    let pool = Pool::new(corpora)?;
    generate_concat(corpora, spec, |rng| {
        let joins = spec.draw_joins(rng);
        vec![pool.draw(rng); joins]
    })
}

fn default_vocab(corpora: &[ParallelCorpus], side: Side) -> Vocabulary {
    let texts = corpora.iter().flat_map(|c| {
        c.pairs.iter().map(move |(s, t)| match side {
            Side::Source => s.as_str(),
            Side::Target => t.as_str(),
        })
    });
    Vocabulary::from_texts(texts, side)
}

/// Noises one side of the drawn pair into the source; the target stays clean.
pub fn noise_at(
    corpora: &[ParallelCorpus],
    draw: Draw,
    side: Side,
    vocab: &Vocabulary,
    spec: &AugmentSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    check_draw(corpora, draw)?;
    let (c, i) = draw;
    let (src, tgt) = &corpora[c].pairs[i];
    let (noised_side, lang) = match side {
        Side::Source => (src.as_str(), corpora[c].lang.clone()),
        Side::Target => (tgt.as_str(), spec.target_lang.clone()),
    };
    let tokens: Vec<&str> = noised_side.split_whitespace().collect();
    let params = NoiseParams {
        r: spec.noise_r,
        seed: derive_seed(spec.seed, ordinal as u64),
        vocab: Some(vocab),
    };
    let noised = apply_noise(&tokens, &params)?;
    if noised.tokens.is_empty() {
        return Err(Error::EmptyOutput(format!(
            "noise ratio {} removed every token of {noised_side:?}",
            spec.noise_r
        )));
    }
    Ok(GeneratedSegment {
        id: segment_id(spec.kind(), spec.seed, ordinal),
        kind: spec.kind(),
        src: noised.tokens.join(" "),
        tgt: tgt.as_str().to_string(),
        src_langs: vec![lang],
        src_join_offsets: Vec::new(),
        tgt_join_offsets: Vec::new(),
        seed: spec.seed,
        noise_r: Some(spec.noise_r),
        noise_ops: Some(noised.ops),
    })
}

fn generate_noise(
    corpora: &[ParallelCorpus],
    spec: &AugmentSpec,
    side: Side,
) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    let pool = Pool::new(corpora)?;
    let owned;
    let vocab = match &spec.vocab {
        Some(v) => v,
        None => {
            owned = default_vocab(corpora, side);
            &owned
        }
    };
    (0..spec.budget)
        .into_par_iter()
        .map(|ord| {
            let draw = pool.draw(&mut segment_rng(spec.seed, ord as u64));
            noise_at(corpora, draw, side, vocab, spec, ord)
        })
        .collect()
}

/// DenoiseTgt: `noise(y) -> y`.
pub fn denoise_tgt(corpora: &[ParallelCorpus], spec: &AugmentSpec) -> Result<Vec<GeneratedSegment>> {
    generate_noise(corpora, spec, Side::Target)
}

/// NoisySrc: `noise(x) -> y`.
pub fn noisy_src(corpora: &[ParallelCorpus], spec: &AugmentSpec) -> Result<Vec<GeneratedSegment>> {
    generate_noise(corpora, spec, Side::Source)
}

/// Dispatches on `spec.kind`.
pub fn generate(corpora: &[ParallelCorpus], spec: &AugmentSpec) -> Result<Vec<GeneratedSegment>> {
    match spec.kind {
        AugmentKind::CatSl => cat_sl(corpora, spec),
        AugmentKind::CatXl => cat_xl(corpora, spec),
        AugmentKind::CatRepeat => cat_repeat(corpora, spec),
        AugmentKind::DenoiseTgt => denoise_tgt(corpora, spec),
        AugmentKind::NoisySrc => noisy_src(corpora, spec),
    }
}

/// Caps `pool` at `budget` by uniform sampling without replacement, keeping pool order.
pub fn enforce_budget(
    pool: Vec<GeneratedSegment>,
    budget: usize,
    seed: u64,
) -> Vec<GeneratedSegment> {
    if pool.len() <= budget {
        return pool;
    }
    let keep = sample_sorted(pool.len(), budget, seed, "budget");
    let mut keep = keep.into_iter().peekable();
    pool.into_iter()
        .enumerate()
        .filter_map(|(i, seg)| {
            if keep.peek() == Some(&i) {
                keep.next();
                Some(seg)
            } else {
                None
            }
        })
        .collect()
}
