use proptest::prelude::*;

use cskit::attnbleed::{self, AttentionRecord};
use cskit::corpus::{CorpusStats, MultiParallelCorpus, ParallelCorpus};
use cskit::scoring::{self, Smoothing};

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "d", "ek", "fo"]).prop_map(str::to_string)
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..10).prop_map(|w| w.join(" "))
}

fn pairs() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec((sentence(), sentence()), 0..20)
}

/// Row-stochastic grid with interior boundaries.
fn grid() -> impl Strategy<Value = (usize, usize, Vec<Vec<f64>>)> {
    (2usize..8, 2usize..8).prop_flat_map(|(src, tgt)| {
        (
            1..src,
            1..tgt,
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, src), tgt).prop_map(|rows| {
                rows.into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.into_iter().map(|v| v / s).collect()
                    })
                    .collect()
            }),
        )
    })
}

fn rec(sb: usize, tb: usize, rows: Vec<Vec<f64>>) -> AttentionRecord {
    AttentionRecord::from_nested("p", sb, tb, &[vec![rows]]).unwrap()
}

proptest! {
    #[test]
    fn stats_are_additive(a in pairs(), b in pairs()) {
        let ca = ParallelCorpus::from_strs("bn", &a, true).unwrap();
        let cb = ParallelCorpus::from_strs("bn", &b, true).unwrap();
        let joined: Vec<(String, String)> = a.iter().chain(&b).cloned().collect();
        let cab = ParallelCorpus::from_strs("bn", &joined, true).unwrap();
        prop_assert_eq!(cab.stats(), ca.stats() + cb.stats());
        let s: CorpusStats = cab.stats();
        prop_assert!(s.segments <= s.src_tokens);
    }

    #[test]
    fn ragged_multiparallel_is_rejected(la in 1usize..6, lb in 1usize..6, lt in 1usize..6) {
        prop_assume!(!(la == lb && lb == lt));
        let mk = |n: usize| (0..n).map(|i| format!("s {i}")).collect::<Vec<_>>();
        let sources = vec![("bn", mk(la)), ("hi", mk(lb))];
        let r = MultiParallelCorpus::from_strs(&sources, &mk(lt), "en", true);
        prop_assert!(r.is_err());
    }

    #[test]
    fn bleed_only_depends_on_block_sums((sb, tb, rows) in grid(), seed in any::<u64>()) {
        let base = attnbleed::bleed_single(&rec(sb, tb, rows.clone()), 0, 0).unwrap();
        // Reverse the positions strictly inside each source block, row by row.
        let permuted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if seed % 2 == 0 {
                    r[..sb].reverse();
                }
                r[sb..].reverse();
                r
            })
            .collect();
        let mut permuted = permuted;
        // Swap two target rows inside the first block.
        if tb >= 2 {
            permuted.swap(0, tb - 1);
        }
        let after = attnbleed::bleed_single(&rec(sb, tb, permuted), 0, 0).unwrap();
        prop_assert!((base - after).abs() < 1e-12);
    }

    #[test]
    fn bleed_complements_within_block_mass((sb, tb, rows) in grid()) {
        let tgt = rows.len();
        let within: f64 = rows
            .iter()
            .enumerate()
            .map(|(t, r)| if t < tb { r[..sb].iter().sum::<f64>() } else { r[sb..].iter().sum::<f64>() })
            .sum::<f64>() / tgt as f64;
        let b = attnbleed::bleed_single(&rec(sb, tb, rows), 0, 0).unwrap();
        prop_assert!((within + b - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn mean_bleed_is_idempotent_under_duplication(grids in prop::collection::vec(grid(), 1..5)) {
        let records: Vec<AttentionRecord> = grids.into_iter().map(|(sb, tb, rows)| rec(sb, tb, rows)).collect();
        let once = attnbleed::mean_bleed(&records, false).unwrap();
        let doubled: Vec<AttentionRecord> = records.iter().chain(&records).cloned().collect();
        let twice = attnbleed::mean_bleed(&doubled, false).unwrap();
        prop_assert!((once.mean - twice.mean).abs() < 1e-12);
        let per: f64 = once.per_record.iter().map(|r| r.mean).sum::<f64>() / once.n_records as f64;
        prop_assert!((once.mean - per).abs() < 1e-12);
    }

    #[test]
    fn bleu_ignores_segment_order(corpus in prop::collection::vec((sentence(), sentence()), 1..12), rot in 0usize..12) {
        let (h, r): (Vec<String>, Vec<String>) = corpus.iter().cloned().unzip();
        let k = rot % corpus.len();
        let mut h2 = h.clone();
        let mut r2 = r.clone();
        h2.rotate_left(k);
        r2.rotate_left(k);
        for smoothing in [Smoothing::None, Smoothing::AddK] {
            let a = scoring::bleu(&h, &r, smoothing).unwrap().score;
            let b = scoring::bleu(&h2, &r2, smoothing).unwrap().score;
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=100.0).contains(&a));
        }
    }

    #[test]
    fn identical_pair_does_not_lower_a_dominated_corpus(
        exact in prop::collection::vec(sentence(), 3..12),
        noisy in prop::collection::vec((sentence(), sentence()), 0..2),
        extra in sentence(),
    ) {
        let mut hyps: Vec<String> = exact.clone();
        let mut refs: Vec<String> = exact;
        for (h, r) in noisy {
            hyps.push(h);
            refs.push(r);
        }
        let before = scoring::bleu(&hyps, &refs, Smoothing::AddK).unwrap().score;
        hyps.push(extra.clone());
        refs.push(extra);
        let after = scoring::bleu(&hyps, &refs, Smoothing::AddK).unwrap().score;
        prop_assert!(after + 1e-9 >= before, "{before} -> {after}");
    }

    #[test]
    fn perfect_score_iff_exact(corpus in prop::collection::vec((sentence(), sentence()), 1..8)) {
        let (h, r): (Vec<String>, Vec<String>) = corpus.into_iter().unzip();
        let score = scoring::bleu(&h, &r, Smoothing::None).unwrap().score;
        prop_assert_eq!(score == 100.0, h == r);
    }
}
