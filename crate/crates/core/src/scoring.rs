//! Corpus-level BLEU over whitespace tokens.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::{Error, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    #[default]
    None,
    /// Adds 1 to matches and totals of orders 2 and above.
    AddK,
}

/// Clipped n-gram matches and totals summed over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

fn ngram_counts<'t, 'a>(tokens: &'t [&'a str], n: usize) -> HashMap<&'t [&'a str], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sufficient statistics for one hypothesis/reference pair.
pub fn segment_stats(hyp: &str, reference: &str) -> BleuStats {
    let h: Vec<&str> = hyp.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    let mut stats = BleuStats {
        hyp_len: h.len(),
        ref_len: r.len(),
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let ref_counts = ngram_counts(&r, n);
        let hyp_counts = ngram_counts(&h, n);
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        stats.totals[n - 1] = h.len().saturating_sub(n - 1);
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    /// 0 to 100.
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precisions.map(|p| format!("{:.1}", p * 100.0));
        write!(
            f,
            "BLEU = {:.2} ({}, BP={:.3}, hyp_len={}, ref_len={})",
            self.score,
            p.join("/"),
            self.brevity_penalty,
            self.hyp_len,
            self.ref_len
        )
    }
}

impl BleuStats {
    /// Orders with no hypothesis n-grams are left out of the geometric mean;
    /// an empty hypothesis corpus scores 0.
    pub fn report(&self, smoothing: Smoothing) -> BleuReport {
        let mut precisions = [0.0; MAX_ORDER];
        let mut log_sum = 0.0;
        let mut orders = 0usize;
        let mut zero = false;
        for (n, p) in precisions.iter_mut().enumerate() {
            let (mut m, mut t) = (self.matches[n] as f64, self.totals[n] as f64);
            if smoothing == Smoothing::AddK && n > 0 {
                m += 1.0;
                t += 1.0;
            }
            if t == 0.0 {
                continue;
            }
            *p = m / t;
            orders += 1;
            if m == 0.0 {
                zero = true;
            } else {
                log_sum += p.ln();
            }
        }
        let brevity_penalty = if self.hyp_len == 0 {
            0.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp().min(1.0)
        };
        let score = if zero || orders == 0 || self.hyp_len == 0 {
            0.0
        } else {
            100.0 * brevity_penalty * (log_sum / orders as f64).exp()
        };
        BleuReport {
            score,
            precisions,
            brevity_penalty,
            hyp_len: self.hyp_len,
            ref_len: self.ref_len,
        }
    }
}

/// Corpus BLEU of line-aligned hypotheses against single references.
pub fn bleu<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
    smoothing: Smoothing,
) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::Alignment(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyOutput("no hypothesis segments".into()));
    }
    let mut total = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        total += segment_stats(h.as_ref(), r.as_ref());
    }
    Ok(total.report(smoothing))
}
