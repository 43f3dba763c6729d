//! Corpus BLEU through additive sufficient statistics.
//!
//! Per-sentence [`BleuStats`] are integer counts, so summing them is exact and
//! order-independent. The optimized error is `1 - BLEU`.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use rayon::prelude::*;

use crate::corpus::TuningCorpus;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BleuStats {
    /// Clipped n-gram matches for n = 1..=4.
    pub matches: [u64; MAX_ORDER],
    /// Hypothesis n-gram counts for n = 1..=4.
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    /// Length of the reference closest to the hypothesis length.
    pub ref_len: u64,
}

impl Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, rhs: BleuStats) -> BleuStats {
        self += rhs;
        self
    }
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += rhs.matches[n];
            self.totals[n] += rhs.totals[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

/// Only defined when `rhs` was previously added in; panics on underflow.
impl SubAssign for BleuStats {
    fn sub_assign(&mut self, rhs: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] -= rhs.matches[n];
            self.totals[n] -= rhs.totals[n];
        }
        self.hyp_len -= rhs.hyp_len;
        self.ref_len -= rhs.ref_len;
    }
}

impl Sub for BleuStats {
    type Output = BleuStats;

    fn sub(mut self, rhs: BleuStats) -> BleuStats {
        self -= rhs;
        self
    }
}

impl std::iter::Sum for BleuStats {
    fn sum<I: Iterator<Item = BleuStats>>(iter: I) -> BleuStats {
        iter.fold(BleuStats::default(), Add::add)
    }
}

impl<'a> std::iter::Sum<&'a BleuStats> for BleuStats {
    fn sum<I: Iterator<Item = &'a BleuStats>>(iter: I) -> BleuStats {
        iter.copied().sum()
    }
}

impl BleuStats {
    pub fn bleu(&self) -> f64 {
        corpus_bleu(self).bleu
    }

    pub fn error(&self) -> ErrorValue {
        corpus_bleu(self)
    }
}

/// `error = 1 - bleu`, both in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ErrorValue {
    pub error: f64,
    pub bleu: f64,
}

impl ErrorValue {
    pub fn from_bleu(bleu: f64) -> Self {
        ErrorValue {
            error: 1.0 - bleu,
            bleu,
        }
    }

    /// BLEU on the ×100 scale used in reports.
    pub fn bleu100(&self) -> f64 {
        self.bleu * 100.0
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram statistics of one hypothesis against its references.
///
/// An empty reference list yields zero matches and `ref_len = 0`.
pub fn sentence_bleu_stats<S: AsRef<str>, R: AsRef<[S]>>(hyp: &[S], refs: &[R]) -> BleuStats {
    let hyp_len = hyp.len() as u64;
    let mut stats = BleuStats {
        hyp_len,
        ref_len: closest_ref_len(hyp.len(), refs.iter().map(|r| r.as_ref().len())),
        ..BleuStats::default()
    };
    for n in 1..=MAX_ORDER {
        stats.totals[n - 1] = hyp_len.saturating_sub(n as u64 - 1);
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref: HashMap<Vec<&str>, u64> = HashMap::new();
        for r in refs {
            for (g, c) in ngram_counts(r.as_ref(), n) {
                let slot = max_ref.entry(g).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// Closest reference length; ties go to the shorter reference.
fn closest_ref_len(hyp_len: usize, ref_lens: impl Iterator<Item = usize>) -> u64 {
    ref_lens
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0) as u64
}

pub fn aggregate(stats: &[BleuStats]) -> BleuStats {
    stats.iter().sum()
}

/// Unsmoothed 4-gram corpus BLEU with brevity penalty.
pub fn corpus_bleu(agg: &BleuStats) -> ErrorValue {
    if agg.hyp_len == 0 || agg.matches.iter().chain(&agg.totals).any(|&c| c == 0) {
        return ErrorValue::from_bleu(0.0);
    }
    let log_precision: f64 = agg
        .matches
        .iter()
        .zip(&agg.totals)
        .map(|(&m, &t)| (m as f64).ln() - (t as f64).ln())
        .sum::<f64>()
        / MAX_ORDER as f64;
    let brevity = if agg.hyp_len > agg.ref_len {
        0.0
    } else {
        1.0 - agg.ref_len as f64 / agg.hyp_len as f64
    };
    let bleu = (log_precision + brevity).exp().min(1.0);
    ErrorValue::from_bleu(bleu)
}

/// Per-hypothesis BLEU statistics for a whole corpus, indexed `[sentence][hypothesis]`.
///
/// Statistics depend only on tokens, so this is computed once per corpus and
/// reused by every line search.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsCache {
    stats: Vec<Vec<BleuStats>>,
}

impl StatsCache {
    pub fn build(corpus: &TuningCorpus) -> Self {
        let stats = corpus
            .entries()
            .par_iter()
            .map(|e| {
                e.hypotheses
                    .iter()
                    .map(|h| sentence_bleu_stats(&h.tokens, &e.references))
                    .collect()
            })
            .collect();
        StatsCache { stats }
    }

    pub fn get(&self, sentence: usize, hyp: usize) -> BleuStats {
        self.stats[sentence][hyp]
    }

    pub fn sentence(&self, sentence: usize) -> &[BleuStats] {
        &self.stats[sentence]
    }

    /// Aggregate statistics of a per-sentence hypothesis selection.
    pub fn selection_stats(&self, selection: &[usize]) -> BleuStats {
        selection
            .iter()
            .enumerate()
            .map(|(s, &k)| self.stats[s][k])
            .sum()
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }
}
