//! Generated segments: the shared record type for check sets and augmentations.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::noise::NoiseOp;
use crate::corpus::{CorpusStats, LangCode};
use crate::{Error, Result};

/// Default glue between joined sentences.
pub const SPACE: &str = " ";

/// Evaluation check sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckKind {
    /// Source sentence followed by the next target sentence.
    CtlFwd,
    /// Target sentence followed by the next source sentence.
    CtlRev,
    Csl,
    Cxl,
    Rxl,
    /// Up to `k` consecutive same-language sentences.
    Cksl(usize),
}

/// Training augmentation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentKind {
    CatSl,
    CatXl,
    CatRepeat,
    DenoiseTgt,
    NoisySrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Check(CheckKind),
    Augment(AugmentKind),
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentKind::Check(c) => match c {
                CheckKind::CtlFwd => f.write_str("ctl_fwd"),
                CheckKind::CtlRev => f.write_str("ctl_rev"),
                CheckKind::Csl => f.write_str("csl"),
                CheckKind::Cxl => f.write_str("cxl"),
                CheckKind::Rxl => f.write_str("rxl"),
                CheckKind::Cksl(k) => write!(f, "c{k}sl"),
            },
            SegmentKind::Augment(a) => f.write_str(match a {
                AugmentKind::CatSl => "catsl",
                AugmentKind::CatXl => "catxl",
                AugmentKind::CatRepeat => "catrepeat",
                AugmentKind::DenoiseTgt => "denoisetgt",
                AugmentKind::NoisySrc => "noisysrc",
            }),
        }
    }
}

impl FromStr for SegmentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        use AugmentKind::*;
        use CheckKind::*;
        Ok(match s {
            "ctl_fwd" => SegmentKind::Check(CtlFwd),
            "ctl_rev" => SegmentKind::Check(CtlRev),
            "csl" => SegmentKind::Check(Csl),
            "cxl" => SegmentKind::Check(Cxl),
            "rxl" => SegmentKind::Check(Rxl),
            "catsl" => SegmentKind::Augment(CatSl),
            "catxl" => SegmentKind::Augment(CatXl),
            "catrepeat" => SegmentKind::Augment(CatRepeat),
            "denoisetgt" => SegmentKind::Augment(DenoiseTgt),
            "noisysrc" => SegmentKind::Augment(NoisySrc),
            other => {
                let k = other
                    .strip_prefix('c')
                    .and_then(|r| r.strip_suffix("sl"))
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|k| *k >= 2)
                    .ok_or_else(|| Error::Validation(format!("unknown segment kind {other:?}")))?;
                SegmentKind::Check(Cksl(k))
            }
        })
    }
}

impl Serialize for SegmentKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmentKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One generated source/target pair with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSegment {
    pub id: String,
    pub kind: SegmentKind,
    pub src: String,
    pub tgt: String,
    /// Language of each joined source constituent.
    pub src_langs: Vec<LangCode>,
    /// Character offsets where the glue between source constituents begins.
    #[serde(rename = "src_joins")]
    pub src_join_offsets: Vec<usize>,
    #[serde(rename = "tgt_joins")]
    pub tgt_join_offsets: Vec<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_ops: Option<Vec<NoiseOp>>,
}

pub fn segment_id(kind: SegmentKind, seed: u64, ordinal: usize) -> String {
    format!("{kind}-{seed}-{ordinal}")
}

impl GeneratedSegment {
    /// Joins constituents on both sides with `glue` and records the boundaries.
    pub fn joined<S: AsRef<str>, T: AsRef<str>>(
        kind: SegmentKind,
        seed: u64,
        ordinal: usize,
        src_parts: &[S],
        src_langs: Vec<LangCode>,
        tgt_parts: &[T],
        glue: &str,
    ) -> Self {
        debug_assert_eq!(src_parts.len(), src_langs.len());
        let (src, src_join_offsets) = join_sentences(src_parts, glue);
        let (tgt, tgt_join_offsets) = join_sentences(tgt_parts, glue);
        GeneratedSegment {
            id: segment_id(kind, seed, ordinal),
            kind,
            src,
            tgt,
            src_langs,
            src_join_offsets,
            tgt_join_offsets,
            seed,
            noise_r: None,
            noise_ops: None,
        }
    }

    pub fn split_src(&self, glue: &str) -> Result<Vec<String>> {
        split_joined(&self.src, &self.src_join_offsets, glue)
    }

    pub fn split_tgt(&self, glue: &str) -> Result<Vec<String>> {
        split_joined(&self.tgt, &self.tgt_join_offsets, glue)
    }
}

/// Concatenates `parts` with `glue`; offsets are the character positions where
/// each glue run starts (equivalently, where each non-final part ends).
pub fn join_sentences<S: AsRef<str>>(parts: &[S], glue: &str) -> (String, Vec<usize>) {
    let mut text = String::new();
    let mut offsets = Vec::with_capacity(parts.len().saturating_sub(1));
    let mut chars = 0usize;
    let glue_chars = glue.chars().count();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            offsets.push(chars);
            text.push_str(glue);
            chars += glue_chars;
        }
        let part = part.as_ref();
        text.push_str(part);
        chars += part.chars().count();
    }
    (text, offsets)
}

/// Inverse of [`join_sentences`].
pub fn split_joined(text: &str, offsets: &[usize], glue: &str) -> Result<Vec<String>> {
    // byte index of every char boundary, including the end
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let glue_chars = glue.chars().count();
    let mut pieces = Vec::with_capacity(offsets.len() + 1);
    let mut start = 0usize;
    for &off in offsets {
        if off <= start || off + glue_chars > n_chars {
            return Err(Error::Validation(format!(
                "join offset {off} is not interior to {text:?}"
            )));
        }
        pieces.push(text[bounds[start]..bounds[off]].to_string());
        let glue_end = off + glue_chars;
        if &text[bounds[off]..bounds[glue_end]] != glue {
            return Err(Error::Validation(format!(
                "expected glue {glue:?} at offset {off} in {text:?}"
            )));
        }
        start = glue_end;
    }
    if start >= n_chars && !text.is_empty() {
        return Err(Error::Validation(format!("empty final constituent in {text:?}")));
    }
    pieces.push(text[bounds[start]..].to_string());
    Ok(pieces)
}

/// Serializes segments as JSON lines.
pub fn to_jsonl(segments: &[GeneratedSegment]) -> Result<String> {
    let mut out = String::new();
    for seg in segments {
        out.push_str(&serde_json::to_string(seg)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<GeneratedSegment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Error::Validation(format!("{}:{}: {}", path.display(), i + 1, e))
            })
        })
        .collect()
}

/// Plain-text `.src` and `.tgt` bodies, one segment per line.
pub fn to_plain(segments: &[GeneratedSegment]) -> (String, String) {
    let mut src = String::new();
    let mut tgt = String::new();
    for seg in segments {
        src.push_str(&seg.src);
        src.push('\n');
        tgt.push_str(&seg.tgt);
        tgt.push('\n');
    }
    (src, tgt)
}

pub fn stats(segments: &[GeneratedSegment]) -> CorpusStats {
    CorpusStats::from_pairs(segments.iter().map(|s| (s.src.as_str(), s.tgt.as_str())))
}
