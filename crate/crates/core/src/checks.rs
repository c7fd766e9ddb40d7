//! Evaluation check sets built from a multi-parallel corpus.
//!
//! Each generator enumerates (or draws) candidates, downsamples them to the
//! requested count under the [`CheckSpec`] seed, and emits [`GeneratedSegment`]s whose
//! target side is the space-join of the aligned references.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{LangCode, MultiParallelCorpus};
use crate::rng::{sample_sorted, segment_rng, set_rng};
use crate::segment::{CheckKind, GeneratedSegment, SegmentKind, SPACE};
use crate::{Error, Result};

/// How many segments a check set should contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    Exactly(usize),
    /// Every candidate. For sets drawn at random (R-XL, C-kSL) this means one
    /// segment per source row, i.e. `K * n`.
    All,
}

/// Source-language pairs for C-XL.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LangPairPolicy {
    /// Uniform over ordered pairs `(k, m)` with `k != m`.
    #[default]
    Uniform,
    /// Always this ordered pair.
    Fixed(LangCode, LangCode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckSpec {
    pub count: Count,
    pub seed: u64,
    pub lang_pair_policy: LangPairPolicy,
    pub join: String,
}

impl CheckSpec {
    pub fn new(count: Count, seed: u64) -> Self {
        CheckSpec {
            count,
            seed,
            lang_pair_policy: LangPairPolicy::Uniform,
            join: SPACE.to_string(),
        }
    }

    pub fn with_pair(mut self, first: LangCode, second: LangCode) -> Self {
        self.lang_pair_policy = LangPairPolicy::Fixed(first, second);
        self
    }

    pub fn with_join(mut self, join: impl Into<String>) -> Self {
        self.join = join.into();
        self
    }

    fn validate(&self) -> Result<()> {
        if self.count == Count::Exactly(0) {
            return Err(Error::Parameter("count must be at least 1".into()));
        }
        Ok(())
    }

    fn limit(&self, pool: usize) -> usize {
        match self.count {
            Count::Exactly(n) => n.min(pool),
            Count::All => pool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtlDirection {
    Fwd,
    Rev,
    /// Half forward, half reverse, assigned by seed.
    Mixed,
}

fn require_coherent(corpus: &MultiParallelCorpus, name: &str) -> Result<()> {
    if !corpus.order_coherent() {
        return Err(Error::Precondition(format!(
            "{name} requires coherent sentence order"
        )));
    }
    Ok(())
}

fn require_pairs(corpus: &MultiParallelCorpus, name: &str) -> Result<()> {
    if corpus.len() < 2 {
        return Err(Error::EmptyOutput(format!(
            "{name} needs at least 2 sentences per language, corpus has {}",
            corpus.len()
        )));
    }
    Ok(())
}

fn require_two_langs(corpus: &MultiParallelCorpus, name: &str) -> Result<()> {
    if corpus.k() < 2 {
        return Err(Error::Precondition(format!(
            "{name} requires at least two source languages, corpus has {}",
            corpus.k()
        )));
    }
    Ok(())
}

fn lang_index(corpus: &MultiParallelCorpus, lang: &LangCode) -> Result<usize> {
    corpus
        .lang_index(lang.as_str())
        .ok_or_else(|| Error::Parameter(format!("language {lang} is not in the corpus")))
}

fn check_index(corpus: &MultiParallelCorpus, lang: usize, i: usize) -> Result<()> {
    if lang >= corpus.k() || i >= corpus.len() {
        return Err(Error::Parameter(format!(
            "position (lang {lang}, row {i}) outside a {}x{} corpus",
            corpus.k(),
            corpus.len()
        )));
    }
    Ok(())
}

/// `x_i^(k) + y_{i+1}` (forward) or `y_i + x_{i+1}^(k)` (reverse), both to `y_i + y_{i+1}`.
pub fn ctl_at(
    corpus: &MultiParallelCorpus,
    forward: bool,
    lang: usize,
    i: usize,
    spec: &CheckSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    check_index(corpus, lang, i + 1)?;
    let src_lang = corpus.langs()[lang].clone();
    let tgt_lang = corpus.target_lang().clone();
    let (kind, parts, langs) = if forward {
        (
            CheckKind::CtlFwd,
            [corpus.source(lang, i).as_str(), corpus.target(i + 1).as_str()],
            vec![src_lang, tgt_lang],
        )
    } else {
        (
            CheckKind::CtlRev,
            [corpus.target(i).as_str(), corpus.source(lang, i + 1).as_str()],
            vec![tgt_lang, src_lang],
        )
    };
    Ok(GeneratedSegment::joined(
        SegmentKind::Check(kind),
        spec.seed,
        ordinal,
        &parts,
        langs,
        &[corpus.target(i).as_str(), corpus.target(i + 1).as_str()],
        &spec.join,
    ))
}

/// `x_i^(k) + x_{i+1}^(k) -> y_i + y_{i+1}`.
pub fn csl_at(
    corpus: &MultiParallelCorpus,
    lang: usize,
    i: usize,
    spec: &CheckSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    cxl_like(corpus, CheckKind::Csl, (lang, i), (lang, i + 1), spec, ordinal)
}

/// `x_i^(k) + x_{i+1}^(m) -> y_i + y_{i+1}`.
pub fn cxl_at(
    corpus: &MultiParallelCorpus,
    first: usize,
    second: usize,
    i: usize,
    spec: &CheckSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    if first == second {
        return Err(Error::Parameter(
            "C-XL pairs must use two different languages".into(),
        ));
    }
    cxl_like(corpus, CheckKind::Cxl, (first, i), (second, i + 1), spec, ordinal)
}

/// `x_i^(k) + x_j^(m) -> y_i + y_j`.
pub fn rxl_at(
    corpus: &MultiParallelCorpus,
    a: (usize, usize),
    b: (usize, usize),
    spec: &CheckSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    if a == b {
        return Err(Error::Parameter(
            "R-XL cannot pair a sentence with itself".into(),
        ));
    }
    cxl_like(corpus, CheckKind::Rxl, a, b, spec, ordinal)
}

fn cxl_like(
    corpus: &MultiParallelCorpus,
    kind: CheckKind,
    a: (usize, usize),
    b: (usize, usize),
    spec: &CheckSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    check_index(corpus, a.0, a.1)?;
    check_index(corpus, b.0, b.1)?;
    Ok(GeneratedSegment::joined(
        SegmentKind::Check(kind),
        spec.seed,
        ordinal,
        &[corpus.source(a.0, a.1).as_str(), corpus.source(b.0, b.1).as_str()],
        vec![corpus.langs()[a.0].clone(), corpus.langs()[b.0].clone()],
        &[corpus.target(a.1).as_str(), corpus.target(b.1).as_str()],
        &spec.join,
    ))
}

/// `j` consecutive sentences of one language starting at row `i`.
pub fn cksl_at(
    corpus: &MultiParallelCorpus,
    k_max: usize,
    lang: usize,
    i: usize,
    joins: usize,
    spec: &CheckSpec,
    ordinal: usize,
) -> Result<GeneratedSegment> {
    if joins == 0 || joins > k_max {
        return Err(Error::Parameter(format!(
            "join count {joins} outside [1, {k_max}]"
        )));
    }
    check_index(corpus, lang, i + joins - 1)?;
    let rows = i..i + joins;
    let src: Vec<&str> = rows.clone().map(|r| corpus.source(lang, r).as_str()).collect();
    let tgt: Vec<&str> = rows.map(|r| corpus.target(r).as_str()).collect();
    Ok(GeneratedSegment::joined(
        SegmentKind::Check(CheckKind::Cksl(k_max)),
        spec.seed,
        ordinal,
        &src,
        vec![corpus.langs()[lang].clone(); joins],
        &tgt,
        &spec.join,
    ))
}

/// Consecutive `(lang, row)` candidates, language-major.
fn consecutive_pool(corpus: &MultiParallelCorpus) -> Vec<(usize, usize)> {
    (0..corpus.k())
        .flat_map(|k| (0..corpus.len() - 1).map(move |i| (k, i)))
        .collect()
}

/// C-TL: source/target code-switching across a sentence boundary.
pub fn gen_ctl(
    corpus: &MultiParallelCorpus,
    direction: CtlDirection,
    spec: &CheckSpec,
) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    require_coherent(corpus, "C-TL")?;
    require_pairs(corpus, "C-TL")?;
    let pool = consecutive_pool(corpus);
    let picked = sample_sorted(pool.len(), spec.limit(pool.len()), spec.seed, "ctl");
    let forward: Vec<bool> = match direction {
        CtlDirection::Fwd => vec![true; picked.len()],
        CtlDirection::Rev => vec![false; picked.len()],
        CtlDirection::Mixed => {
            let mut dirs: Vec<bool> = (0..picked.len()).map(|o| o % 2 == 0).collect();
            dirs.shuffle(&mut set_rng(spec.seed, "ctl-direction"));
            dirs
        }
    };
    picked
        .iter()
        .zip(forward)
        .enumerate()
        .map(|(ord, (&p, fwd))| {
            let (k, i) = pool[p];
            ctl_at(corpus, fwd, k, i, spec, ord)
        })
        .collect()
}

/// C-SL: consecutive sentences in the same language.
pub fn gen_csl(corpus: &MultiParallelCorpus, spec: &CheckSpec) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    require_coherent(corpus, "C-SL")?;
    require_pairs(corpus, "C-SL")?;
    let pool = consecutive_pool(corpus);
    sample_sorted(pool.len(), spec.limit(pool.len()), spec.seed, "csl")
        .into_iter()
        .enumerate()
        .map(|(ord, p)| {
            let (k, i) = pool[p];
            csl_at(corpus, k, i, spec, ord)
        })
        .collect()
}

/// C-XL: consecutive sentences in two different source languages.
///
/// Under [`LangPairPolicy::Uniform`] the candidates are `(k, i)` as for C-SL
/// and the second language is drawn per record from the other `K - 1`.
pub fn gen_cxl(corpus: &MultiParallelCorpus, spec: &CheckSpec) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    require_two_langs(corpus, "C-XL")?;
    require_coherent(corpus, "C-XL")?;
    require_pairs(corpus, "C-XL")?;
    match &spec.lang_pair_policy {
        LangPairPolicy::Fixed(a, b) => {
            let (first, second) = (lang_index(corpus, a)?, lang_index(corpus, b)?);
            let rows = corpus.len() - 1;
            sample_sorted(rows, spec.limit(rows), spec.seed, "cxl")
                .into_iter()
                .enumerate()
                .map(|(ord, i)| cxl_at(corpus, first, second, i, spec, ord))
                .collect()
        }
        LangPairPolicy::Uniform => {
            let pool = consecutive_pool(corpus);
            sample_sorted(pool.len(), spec.limit(pool.len()), spec.seed, "cxl")
                .into_iter()
                .enumerate()
                .map(|(ord, p)| {
                    let (first, i) = pool[p];
                    let mut rng = segment_rng(spec.seed, ord as u64);
                    let mut second = rng.gen_range(0..corpus.k() - 1);
                    if second >= first {
                        second += 1;
                    }
                    cxl_at(corpus, first, second, i, spec, ord)
                })
                .collect()
        }
    }
}

/// Draws an ordered pair of distinct `(lang, row)` positions uniformly.
pub fn draw_rxl<R: Rng>(rng: &mut R, k: usize, n: usize) -> ((usize, usize), (usize, usize)) {
    let items = k * n;
    let a = rng.gen_range(0..items);
    let mut b = rng.gen_range(0..items - 1);
    if b >= a {
        b += 1;
    }
    ((a / n, a % n), (b / n, b % n))
}

/// R-XL: two sentences from random positions and random source languages.
///
/// Coherent ordering is not required. Emitted pairs are distinct.
pub fn gen_rxl(corpus: &MultiParallelCorpus, spec: &CheckSpec) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    require_pairs(corpus, "R-XL")?;
    let (k, n) = (corpus.k(), corpus.len());
    let space = (k * n) * (k * n - 1);
    let wanted = match spec.count {
        Count::Exactly(c) if c > space => {
            return Err(Error::Parameter(format!(
                "R-XL count {c} exceeds the {space} distinct candidates of this corpus"
            )));
        }
        Count::Exactly(c) => c,
        Count::All => (k * n).min(space),
    };
    let mut seen = HashSet::with_capacity(wanted);
    let mut out = Vec::with_capacity(wanted);
    for ord in 0..wanted {
        let mut rng = segment_rng(spec.seed, ord as u64);
        let (a, b) = loop {
            let draw = draw_rxl(&mut rng, k, n);
            if seen.insert(draw) {
                break draw;
            }
        };
        out.push(rxl_at(corpus, a, b, spec, ord)?);
    }
    Ok(out)
}

/// C-kSL: runs of 1..=`k_max` consecutive same-language sentences.
///
/// Each record draws its run length uniformly, then a language and a start row
/// that fits the run.
pub fn gen_cksl(
    corpus: &MultiParallelCorpus,
    k_max: usize,
    spec: &CheckSpec,
) -> Result<Vec<GeneratedSegment>> {
    spec.validate()?;
    if k_max < 2 {
        return Err(Error::Parameter(format!(
            "maximum join count must be at least 2, got {k_max}"
        )));
    }
    require_coherent(corpus, "C-kSL")?;
    if corpus.len() < k_max {
        return Err(Error::Precondition(format!(
            "C-{k_max}SL needs at least {k_max} sentences per language, corpus has {}",
            corpus.len()
        )));
    }
    let wanted = match spec.count {
        Count::Exactly(c) => c,
        Count::All => corpus.k() * corpus.len(),
    };
    (0..wanted)
        .map(|ord| {
            let mut rng = segment_rng(spec.seed, ord as u64);
            let joins = rng.gen_range(1..=k_max);
            let lang = rng.gen_range(0..corpus.k());
            let start = rng.gen_range(0..=corpus.len() - joins);
            cksl_at(corpus, k_max, lang, start, joins, spec, ord)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::split_joined;

    fn two_row() -> MultiParallelCorpus {
        MultiParallelCorpus::from_strs(
            &[("bn", vec!["b1", "b2"]), ("hi", vec!["h1", "h2"])],
            &["e1", "e2"],
            "en",
            true,
        )
        .unwrap()
    }

    fn hi_only(rows: &[&str], tgts: &[&str]) -> MultiParallelCorpus {
        MultiParallelCorpus::from_strs(&[("hi", rows.to_vec())], tgts, "en", true).unwrap()
    }

    fn lang(s: &str) -> LangCode {
        LangCode::new(s).unwrap()
    }

    fn spec() -> CheckSpec {
        CheckSpec::new(Count::All, 1)
    }

    #[test]
    fn ctl_forward_and_reverse() {
        let c = hi_only(&["h1", "h2"], &["e1", "e2"]);
        let fwd = gen_ctl(&c, CtlDirection::Fwd, &spec()).unwrap();
        assert_eq!(fwd.len(), 1);
        assert_eq!(fwd[0].src, "h1 e2");
        assert_eq!(fwd[0].tgt, "e1 e2");
        assert_eq!(fwd[0].src_join_offsets, vec![2]);
        assert_eq!(fwd[0].src_langs, vec![lang("hi"), lang("en")]);
        assert_eq!(fwd[0].id, "ctl_fwd-1-0");

        let rev = gen_ctl(&c, CtlDirection::Rev, &spec()).unwrap();
        assert_eq!(rev[0].src, "e1 h2");
        assert_eq!(rev[0].tgt, "e1 e2");
        assert_eq!(rev[0].src_langs, vec![lang("en"), lang("hi")]);
    }

    #[test]
    fn ctl_preconditions() {
        let incoherent = MultiParallelCorpus::from_strs(
            &[("hi", vec!["h1", "h2"])],
            &["e1", "e2"],
            "en",
            false,
        )
        .unwrap();
        let err = gen_ctl(&incoherent, CtlDirection::Fwd, &spec()).unwrap_err();
        assert!(err.to_string().contains("C-TL requires coherent sentence order"));
        let single = hi_only(&["h1"], &["e1"]);
        assert!(matches!(
            gen_ctl(&single, CtlDirection::Fwd, &spec()),
            Err(Error::EmptyOutput(_))
        ));
    }

    #[test]
    fn ctl_mixed_is_balanced() {
        let rows: Vec<String> = (0..21).map(|i| format!("h{i}")).collect();
        let tgts: Vec<String> = (0..21).map(|i| format!("e{i}")).collect();
        let c = MultiParallelCorpus::from_strs(&[("hi", rows)], &tgts, "en", true).unwrap();
        let out = gen_ctl(&c, CtlDirection::Mixed, &spec()).unwrap();
        assert_eq!(out.len(), 20);
        let fwd = out
            .iter()
            .filter(|s| s.kind == SegmentKind::Check(CheckKind::CtlFwd))
            .count();
        assert_eq!(fwd, 10);
    }

    #[test]
    fn ctl_downsamples_large_pool() {
        // K=10, n=1000: 10 * 999 candidates, 1000 requested.
        let langs: Vec<String> = (0..10).map(|k| format!("l{k}")).collect();
        let sources: Vec<(&str, Vec<String>)> = langs
            .iter()
            .map(|l| (l.as_str(), (0..1000).map(|i| format!("{l}s{i}")).collect()))
            .collect();
        let tgts: Vec<String> = (0..1000).map(|i| format!("t{i}")).collect();
        let c = MultiParallelCorpus::from_strs(&sources, &tgts, "en", true).unwrap();
        let s = CheckSpec::new(Count::Exactly(1000), 7);
        let a = gen_ctl(&c, CtlDirection::Fwd, &s).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, gen_ctl(&c, CtlDirection::Fwd, &s).unwrap());
        let distinct: HashSet<&str> = a.iter().map(|s| s.src.as_str()).collect();
        assert_eq!(distinct.len(), 1000);
        // sample spans many languages
        let first_langs: HashSet<&LangCode> = a.iter().map(|s| &s.src_langs[0]).collect();
        assert_eq!(first_langs.len(), 10);
    }

    #[test]
    fn csl_examples() {
        let c = hi_only(&["h1", "h2"], &["e1", "e2"]);
        let out = gen_csl(&c, &spec()).unwrap();
        assert_eq!(out[0].src, "h1 h2");
        assert_eq!(out[0].tgt, "e1 e2");

        let three = MultiParallelCorpus::from_strs(
            &[("bn", vec!["b1", "b2"]), ("hi", vec!["h1", "h2"]), ("ta", vec!["t1", "t2"])],
            &["e1", "e2"],
            "en",
            true,
        )
        .unwrap();
        let out = gen_csl(&three, &spec()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|s| s.src_langs[0] == s.src_langs[1]));
    }

    #[test]
    fn cxl_forced_pairs() {
        let c = two_row();
        let s = spec().with_pair(lang("bn"), lang("hi"));
        let out = gen_cxl(&c, &s).unwrap();
        assert_eq!(out[0].src, "b1 h2");
        assert_eq!(out[0].tgt, "e1 e2");
        let s = spec().with_pair(lang("hi"), lang("bn"));
        let out = gen_cxl(&c, &s).unwrap();
        assert_eq!(out[0].src, "h1 b2");
        assert_eq!(gen_cxl(&c, &s).unwrap(), out);
    }

    #[test]
    fn cxl_needs_two_languages_and_distinct_pair() {
        let c = hi_only(&["h1", "h2"], &["e1", "e2"]);
        let err = gen_cxl(&c, &spec()).unwrap_err();
        assert!(err.to_string().contains("requires at least two source languages"));
        assert!(cxl_at(&two_row(), 0, 0, 0, &spec(), 0).is_err());
    }

    #[test]
    fn cxl_uniform_never_repeats_language() {
        let c = MultiParallelCorpus::from_strs(
            &[("bn", vec!["b1", "b2", "b3"]), ("hi", vec!["h1", "h2", "h3"]), ("ta", vec!["t1", "t2", "t3"])],
            &["e1", "e2", "e3"],
            "en",
            true,
        )
        .unwrap();
        let out = gen_cxl(&c, &spec()).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|s| s.src_langs[0] != s.src_langs[1]));
    }

    #[test]
    fn rxl_forced_draws() {
        let c = two_row();
        let bn_hi = rxl_at(&c, (0, 0), (1, 1), &spec(), 0).unwrap();
        assert_eq!(bn_hi.src, "b1 h2");
        assert_eq!(bn_hi.tgt, "e1 e2");
        let hi_hi = rxl_at(&c, (1, 1), (1, 0), &spec(), 0).unwrap();
        assert_eq!(hi_hi.src, "h2 h1");
        assert_eq!(hi_hi.tgt, "e2 e1");
    }

    #[test]
    fn rxl_count_limits() {
        let c = two_row();
        // 4 items -> 12 ordered distinct pairs
        let all = gen_rxl(&c, &CheckSpec::new(Count::Exactly(12), 3)).unwrap();
        let distinct: HashSet<(&str, &str)> =
            all.iter().map(|s| (s.src.as_str(), s.tgt.as_str())).collect();
        assert_eq!(distinct.len(), 12);
        let err = gen_rxl(&c, &CheckSpec::new(Count::Exactly(13), 3)).unwrap_err();
        assert!(err.to_string().contains("12"), "{err}");
    }

    #[test]
    fn rxl_does_not_need_coherence() {
        let c = MultiParallelCorpus::from_strs(&[("hi", vec!["h1", "h2"])], &["e1", "e2"], "en", false)
            .unwrap();
        assert_eq!(gen_rxl(&c, &CheckSpec::new(Count::Exactly(2), 0)).unwrap().len(), 2);
    }

    #[test]
    fn rxl_first_slot_language_is_binomial() {
        // K=2, n=10, 10k draws: mean 5000, sd 50; accept 3 sd.
        let mut bn_first = 0;
        for ord in 0..10_000u64 {
            let ((k, _), _) = draw_rxl(&mut segment_rng(11, ord), 2, 10);
            if k == 0 {
                bn_first += 1;
            }
        }
        assert!((4850..=5150).contains(&bn_first), "{bn_first}");
    }

    #[test]
    fn cksl_forced_joins() {
        let c = hi_only(&["h1", "h2", "h3", "h4"], &["e1", "e2", "e3", "e4"]);
        let four = cksl_at(&c, 4, 0, 0, 4, &spec(), 0).unwrap();
        assert_eq!(four.src, "h1 h2 h3 h4");
        assert_eq!(four.src_join_offsets.len(), 3);
        assert_eq!(four.tgt, "e1 e2 e3 e4");
        assert_eq!(four.id, "c4sl-1-0");
        let one = cksl_at(&c, 4, 0, 2, 1, &spec(), 0).unwrap();
        assert_eq!(one.src, "h3");
        assert!(one.src_join_offsets.is_empty());
    }

    #[test]
    fn cksl_params() {
        let c = hi_only(&["h1", "h2", "h3"], &["e1", "e2", "e3"]);
        assert!(matches!(gen_cksl(&c, 1, &spec()), Err(Error::Parameter(_))));
        assert!(gen_cksl(&c, 4, &spec()).is_err());
        let out = gen_cksl(&c, 3, &CheckSpec::new(Count::Exactly(50), 2)).unwrap();
        assert_eq!(out.len(), 50);
        for s in &out {
            let parts = split_joined(&s.src, &s.src_join_offsets, SPACE).unwrap();
            assert!((1..=3).contains(&parts.len()));
        }
    }

    #[test]
    fn zero_count_rejected() {
        let c = two_row();
        assert!(gen_csl(&c, &CheckSpec::new(Count::Exactly(0), 0)).is_err());
    }
}
