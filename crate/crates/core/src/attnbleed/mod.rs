//! Cross-attention bleed on two-sentence segments.
//!
//! For a segment `x1 + x2 -> y1 + y2`, bleed is the attention mass that target
//! positions of one sentence place on source positions of the other sentence,
//! averaged over target positions. [`mean_bleed`] averages it over records,
//! layers and heads.

pub mod binary;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Allowed deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

/// Cross-attention weights of one concatenated segment.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub id: String,
    pub layers: usize,
    pub heads: usize,
    pub src_len: usize,
    pub tgt_len: usize,
    /// Number of source positions in the first sentence.
    pub src_boundary: usize,
    /// Number of target positions in the first sentence.
    pub tgt_boundary: usize,
    /// Row-major `[layer][head][tgt][src]`.
    weights: Vec<f64>,
}

impl AttentionRecord {
    /// Builds a record from a flat row-major weight buffer, checking shape,
    /// boundaries and sign. Row sums are checked separately by [`row_sum_issues`].
    ///
    /// [`row_sum_issues`]: AttentionRecord::row_sum_issues
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        layers: usize,
        heads: usize,
        src_len: usize,
        tgt_len: usize,
        src_boundary: usize,
        tgt_boundary: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if layers == 0 || heads == 0 {
            return Err(Error::Shape(format!("{id}: L and H must be positive")));
        }
        let expected = layers * heads * src_len * tgt_len;
        if weights.len() != expected {
            return Err(Error::Shape(format!(
                "{id}: expected {layers}x{heads}x{tgt_len}x{src_len} = {expected} weights, found {}",
                weights.len()
            )));
        }
        if !(1..src_len).contains(&src_boundary) {
            return Err(Error::Validation(format!(
                "{id}: boundary must be interior: src_boundary {src_boundary} not in [1, {})",
                src_len
            )));
        }
        if !(1..tgt_len).contains(&tgt_boundary) {
            return Err(Error::Validation(format!(
                "{id}: boundary must be interior: tgt_boundary {tgt_boundary} not in [1, {})",
                tgt_len
            )));
        }
        if let Some(pos) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation(format!(
                "{id}: weight {} at flat index {pos} is negative or not finite",
                weights[pos]
            )));
        }
        Ok(AttentionRecord {
            id,
            layers,
            heads,
            src_len,
            tgt_len,
            src_boundary,
            tgt_boundary,
            weights,
        })
    }

    /// Builds a record from nested `[layer][head][tgt][src]` arrays.
    pub fn from_nested(
        id: impl Into<String>,
        src_boundary: usize,
        tgt_boundary: usize,
        grids: &[Vec<Vec<Vec<f64>>>],
    ) -> Result<Self> {
        let id = id.into();
        let layers = grids.len();
        let heads = grids.first().map_or(0, Vec::len);
        let tgt_len = grids.first().and_then(|l| l.first()).map_or(0, Vec::len);
        let src_len = grids
            .first()
            .and_then(|l| l.first())
            .and_then(|h| h.first())
            .map_or(0, Vec::len);
        flatten(&id, layers, heads, tgt_len, src_len, grids)
            .and_then(|w| AttentionRecord::new(id, layers, heads, src_len, tgt_len, src_boundary, tgt_boundary, w))
    }

    /// The `tgt_len x src_len` grid of one layer and head.
    pub fn grid(&self, layer: usize, head: usize) -> &[f64] {
        let size = self.tgt_len * self.src_len;
        let start = (layer * self.heads + head) * size;
        &self.weights[start..start + size]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Rows whose sum differs from 1 by more than [`ROW_SUM_TOLERANCE`].
    pub fn row_sum_issues(&self) -> Vec<RowSumIssue> {
        let mut issues = Vec::new();
        for l in 0..self.layers {
            for h in 0..self.heads {
                for (t, row) in self.grid(l, h).chunks(self.src_len).enumerate() {
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        issues.push(RowSumIssue {
                            id: self.id.clone(),
                            layer: l,
                            head: h,
                            row: t,
                            sum,
                        });
                    }
                }
            }
        }
        issues
    }

    /// Element-wise maximum over all layers and heads.
    pub fn max_grid(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0f64; self.src_len]; self.tgt_len];
        for l in 0..self.layers {
            for h in 0..self.heads {
                for (t, row) in self.grid(l, h).chunks(self.src_len).enumerate() {
                    for (o, w) in out[t].iter_mut().zip(row) {
                        *o = f64::max(*o, *w);
                    }
                }
            }
        }
        out
    }
}

fn flatten(
    id: &str,
    layers: usize,
    heads: usize,
    tgt_len: usize,
    src_len: usize,
    grids: &[Vec<Vec<Vec<f64>>>],
) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(layers * heads * tgt_len * src_len);
    if grids.len() != layers {
        return Err(Error::Shape(format!("{id}: declared L={layers}, grids has {}", grids.len())));
    }
    for (l, layer) in grids.iter().enumerate() {
        if layer.len() != heads {
            return Err(Error::Shape(format!(
                "{id}: layer {l} has {} heads, declared H={heads}",
                layer.len()
            )));
        }
        for (h, head) in layer.iter().enumerate() {
            if head.len() != tgt_len {
                return Err(Error::Shape(format!(
                    "{id}: layer {l} head {h} has {} rows, declared tgt_len={tgt_len}",
                    head.len()
                )));
            }
            for (t, row) in head.iter().enumerate() {
                if row.len() != src_len {
                    return Err(Error::Shape(format!(
                        "{id}: layer {l} head {h} row {t} has {} columns, declared src_len={src_len}",
                        row.len()
                    )));
                }
                flat.extend_from_slice(row);
            }
        }
    }
    Ok(flat)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSumIssue {
    pub id: String,
    pub layer: usize,
    pub head: usize,
    pub row: usize,
    pub sum: f64,
}

impl std::fmt::Display for RowSumIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: layer {} head {} row {} sums to {:.6}",
            self.id, self.layer, self.head, self.row, self.sum
        )
    }
}

/// What to do with rows that do not sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowSumCheck {
    #[default]
    Warn,
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAttention {
    pub records: Vec<AttentionRecord>,
    pub warnings: Vec<RowSumIssue>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Boundary {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    #[serde(rename = "L")]
    layers: usize,
    #[serde(rename = "H")]
    heads: usize,
    src_len: usize,
    tgt_len: usize,
    src_boundary: Boundary,
    tgt_boundary: Boundary,
    grids: Vec<Vec<Vec<Vec<f64>>>>,
}

fn single_boundary(id: &str, side: &str, b: Boundary) -> Result<usize> {
    match b {
        Boundary::One(v) => Ok(v),
        Boundary::Many(v) if v.len() == 1 => Ok(v[0]),
        Boundary::Many(v) => Err(Error::Validation(format!(
            "{id}: {side} lists {} boundaries; bleed is defined for two-sentence records only",
            v.len()
        ))),
    }
}

impl RawRecord {
    fn into_record(self) -> Result<AttentionRecord> {
        let src_b = single_boundary(&self.id, "src_boundary", self.src_boundary)?;
        let tgt_b = single_boundary(&self.id, "tgt_boundary", self.tgt_boundary)?;
        let flat = flatten(&self.id, self.layers, self.heads, self.tgt_len, self.src_len, &self.grids)?;
        AttentionRecord::new(
            self.id,
            self.layers,
            self.heads,
            self.src_len,
            self.tgt_len,
            src_b,
            tgt_b,
            flat,
        )
    }
}

fn finish(records: Vec<AttentionRecord>, check: RowSumCheck) -> Result<ParsedAttention> {
    let warnings: Vec<RowSumIssue> = records.iter().flat_map(AttentionRecord::row_sum_issues).collect();
    if check == RowSumCheck::Strict {
        if let Some(first) = warnings.first() {
            return Err(Error::Validation(format!(
                "{} rows deviate from 1 by more than {ROW_SUM_TOLERANCE}; first: {first}",
                warnings.len()
            )));
        }
    }
    Ok(ParsedAttention { records, warnings })
}

/// Parses JSONL attention records, one per non-blank line.
pub fn parse_attention_jsonl(text: &str, check: RowSumCheck) -> Result<ParsedAttention> {
    let records = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let raw: RawRecord = serde_json::from_str(line)
                .map_err(|e| Error::Validation(format!("line {}: {e}", i + 1)))?;
            raw.into_record()
        })
        .collect::<Result<Vec<_>>>()?;
    finish(records, check)
}

/// Reads an attention file, JSONL or the compact binary form (detected by magic).
pub fn parse_attention(path: &Path, check: RowSumCheck) -> Result<ParsedAttention> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(binary::MAGIC) {
        return finish(binary::decode(&bytes)?, check);
    }
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Validation(format!("{}: not UTF-8 JSONL", path.display())))?;
    parse_attention_jsonl(&text, check)
}

/// Serializes records in the JSONL interchange schema.
pub fn to_jsonl(records: &[AttentionRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let grids: Vec<Vec<Vec<&[f64]>>> = (0..r.layers)
            .map(|l| {
                (0..r.heads)
                    .map(|h| r.grid(l, h).chunks(r.src_len).collect())
                    .collect()
            })
            .collect();
        let v = serde_json::json!({
            "id": r.id,
            "L": r.layers,
            "H": r.heads,
            "src_len": r.src_len,
            "tgt_len": r.tgt_len,
            "src_boundary": r.src_boundary,
            "tgt_boundary": r.tgt_boundary,
            "grids": grids,
        });
        out.push_str(&serde_json::to_string(&v)?);
        out.push('\n');
    }
    Ok(out)
}

/// Bleed of one layer/head (both 0-based).
pub fn bleed_single(record: &AttentionRecord, layer: usize, head: usize) -> Result<f64> {
    if layer >= record.layers || head >= record.heads {
        return Err(Error::Parameter(format!(
            "{}: layer {layer} head {head} outside L={} H={}",
            record.id, record.layers, record.heads
        )));
    }
    Ok(grid_bleed(record, record.grid(layer, head)))
}

fn grid_bleed(r: &AttentionRecord, grid: &[f64]) -> f64 {
    let mut off_block = 0.0;
    for (t, row) in grid.chunks(r.src_len).enumerate() {
        let cross = if t < r.tgt_boundary {
            &row[r.src_boundary..]
        } else {
            &row[..r.src_boundary]
        };
        off_block += cross.iter().sum::<f64>();
    }
    off_block / r.tgt_len as f64
}

/// Bleed of every layer/head, `[layer][head]`.
pub fn bleed_matrix(record: &AttentionRecord) -> Vec<Vec<f64>> {
    (0..record.layers)
        .map(|l| (0..record.heads).map(|h| grid_bleed(record, record.grid(l, h))).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordBleed {
    pub id: String,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleedReport {
    pub mean: f64,
    /// `mean` on a 0-100 scale, one decimal.
    pub mean_scaled: f64,
    /// Mean over records per `[layer][head]`; absent in ragged mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_layer_head: Option<Vec<Vec<f64>>>,
    pub per_record: Vec<RecordBleed>,
    pub n_records: usize,
}

/// Rescales a `[0, 1]` bleed to `[0, 100]` rounded to one decimal.
pub fn scaled(mean: f64) -> f64 {
    (mean * 1000.0).round() / 10.0
}

/// Display form of a bleed on the 0-100 scale, e.g. `0.143` -> `"14.3"`.
pub fn format_scaled(mean: f64) -> String {
    format!("{:.1}", mean * 100.0)
}

/// Averages bleed over records, layers and heads.
///
/// All records must share L and H unless `ragged` is set, in which case each
/// record is first averaged over its own layers and heads.
pub fn mean_bleed(records: &[AttentionRecord], ragged: bool) -> Result<BleedReport> {
    let first = records
        .first()
        .ok_or_else(|| Error::EmptyOutput("no records".into()))?;
    let uniform = records
        .iter()
        .all(|r| r.layers == first.layers && r.heads == first.heads);
    if !uniform && !ragged {
        return Err(Error::Shape(
            "records disagree on layer/head counts; enable ragged mode to average per record".into(),
        ));
    }
    let matrices: Vec<Vec<Vec<f64>>> = records.par_iter().map(bleed_matrix).collect();
    let per_record: Vec<RecordBleed> = records
        .iter()
        .zip(&matrices)
        .map(|(r, m)| {
            let sum: f64 = m.iter().flatten().sum();
            RecordBleed {
                id: r.id.clone(),
                mean: sum / (r.layers * r.heads) as f64,
            }
        })
        .collect();
    let n = records.len() as f64;
    let mean = per_record.iter().map(|r| r.mean).sum::<f64>() / n;
    let per_layer_head = uniform.then(|| {
        let mut acc = vec![vec![0.0; first.heads]; first.layers];
        for m in &matrices {
            for (a_row, m_row) in acc.iter_mut().zip(m) {
                for (a, v) in a_row.iter_mut().zip(m_row) {
                    *a += v;
                }
            }
        }
        acc.iter_mut().flatten().for_each(|a| *a /= n);
        acc
    });
    Ok(BleedReport {
        mean,
        mean_scaled: scaled(mean),
        per_layer_head,
        per_record,
        n_records: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(id: &str, tgt: usize, src: usize, tb: usize, sb: usize) -> AttentionRecord {
        AttentionRecord::new(id, 1, 1, src, tgt, sb, tb, vec![1.0 / src as f64; tgt * src]).unwrap()
    }

    #[test]
    fn block_diagonal_has_no_bleed() {
        let g = vec![vec![vec![
            vec![0.5, 0.5, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.2, 0.8],
        ]]];
        let r = AttentionRecord::from_nested("bd", 2, 2, &g).unwrap();
        assert_eq!(bleed_single(&r, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_closed_form() {
        let r = uniform("u", 6, 8, 3, 4);
        assert!((bleed_single(&r, 0, 0).unwrap() - 0.5).abs() < 1e-12);
        // (tb*(S-sb) + (T-tb)*sb) / (T*S)
        let r = uniform("u2", 5, 7, 2, 3);
        let expected = (2.0 * 4.0 + 3.0 * 3.0) / 35.0;
        assert!((bleed_single(&r, 0, 0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn hand_example_four_by_four() {
        let g = vec![vec![vec![
            vec![0.6, 0.3, 0.05, 0.05],
            vec![0.2, 0.7, 0.05, 0.05],
            vec![0.05, 0.05, 0.5, 0.4],
            vec![0.0, 0.1, 0.4, 0.5],
        ]]];
        let r = AttentionRecord::from_nested("h", 2, 2, &g).unwrap();
        assert!((bleed_single(&r, 0, 0).unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn layer_head_out_of_range() {
        let r = uniform("u", 2, 2, 1, 1);
        assert!(bleed_single(&r, 1, 0).is_err());
        assert!(bleed_single(&r, 0, 1).is_err());
    }

    #[test]
    fn construction_errors() {
        let err = AttentionRecord::new("b", 1, 1, 2, 2, 2, 1, vec![0.5; 4]).unwrap_err();
        assert!(err.to_string().contains("boundary must be interior"));
        assert!(AttentionRecord::new("b", 1, 1, 2, 2, 0, 1, vec![0.5; 4]).is_err());
        assert!(matches!(
            AttentionRecord::new("s", 1, 1, 2, 2, 1, 1, vec![0.5; 3]),
            Err(Error::Shape(_))
        ));
        let mut w = vec![0.5; 4];
        w[1] = -0.1;
        assert!(matches!(
            AttentionRecord::new("n", 1, 1, 2, 2, 1, 1, w),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn jsonl_parsing_paths() {
        let ok = r#"{"id":"a","L":1,"H":1,"src_len":2,"tgt_len":2,"src_boundary":1,"tgt_boundary":1,"grids":[[[[0.5,0.5],[0.5,0.5]]]]}"#;
        let p = parse_attention_jsonl(ok, RowSumCheck::Strict).unwrap();
        assert_eq!(p.records.len(), 1);
        assert!(p.warnings.is_empty());

        let low = ok.replace("[0.5,0.5]]]]", "[0.5,0.4]]]]");
        let p = parse_attention_jsonl(&low, RowSumCheck::Warn).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.warnings[0].row, 1);
        assert!(parse_attention_jsonl(&low, RowSumCheck::Strict).is_err());

        let shape = ok.replace("\"src_len\":2", "\"src_len\":3");
        assert!(matches!(
            parse_attention_jsonl(&shape, RowSumCheck::Warn),
            Err(Error::Shape(_))
        ));
        let multi = ok.replace("\"src_boundary\":1", "\"src_boundary\":[1,2]");
        let err = parse_attention_jsonl(&multi, RowSumCheck::Warn).unwrap_err();
        assert!(err.to_string().contains("two-sentence"));
        let single_list = ok.replace("\"src_boundary\":1", "\"src_boundary\":[1]");
        assert!(parse_attention_jsonl(&single_list, RowSumCheck::Warn).is_ok());
    }

    #[test]
    fn jsonl_round_trip() {
        let r = uniform("u", 3, 4, 1, 2);
        let text = to_jsonl(std::slice::from_ref(&r)).unwrap();
        let back = parse_attention_jsonl(&text, RowSumCheck::Strict).unwrap();
        assert_eq!(back.records, vec![r]);
    }

    #[test]
    fn mean_examples() {
        let zero = AttentionRecord::from_nested("z", 1, 1, &[vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]]).unwrap();
        let half = uniform("u", 2, 2, 1, 1);
        let rep = mean_bleed(&[zero.clone(), half.clone()], false).unwrap();
        assert!((rep.mean - 0.25).abs() < 1e-12);
        assert_eq!(rep.n_records, 2);
        assert_eq!(rep.per_layer_head.as_ref().unwrap().len(), 1);
        let single = mean_bleed(&[half], false).unwrap();
        assert!((single.mean - 0.5).abs() < 1e-12);
        assert_eq!(single.mean_scaled, 50.0);
        assert!(mean_bleed(&[], false).unwrap_err().to_string().contains("no records"));
    }

    #[test]
    fn ragged_mode() {
        let a = uniform("a", 2, 2, 1, 1);
        let b = AttentionRecord::new("b", 2, 1, 2, 2, 1, 1, vec![0.5; 8]).unwrap();
        assert!(matches!(mean_bleed(&[a.clone(), b.clone()], false), Err(Error::Shape(_))));
        let rep = mean_bleed(&[a, b], true).unwrap();
        assert!(rep.per_layer_head.is_none());
        assert!((rep.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn display_scale() {
        assert_eq!(format_scaled(0.143), "14.3");
        assert_eq!(scaled(0.143), 14.3);
        assert_eq!(format_scaled(0.5), "50.0");
    }

    #[test]
    fn max_grid_takes_elementwise_max() {
        let r = AttentionRecord::new("m", 1, 2, 2, 2, 1, 1, vec![0.9, 0.1, 0.2, 0.8, 0.3, 0.7, 0.6, 0.4]).unwrap();
        assert_eq!(r.max_grid(), vec![vec![0.9, 0.7], vec![0.6, 0.8]]);
    }
}
