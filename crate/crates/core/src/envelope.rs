//! Exact line search over the piecewise-constant error surface.
//!
//! Along a ray `w + γ·d` every hypothesis score is a line in γ. The selected
//! hypothesis of a sentence is the top of the upper envelope of its lines, so
//! the corpus error only changes at envelope breakpoints. Merging the
//! breakpoints of all sentences gives intervals of constant error, and the
//! sweep moves through them with delta updates on the BLEU statistics.

use rayon::prelude::*;

use crate::corpus::{dot, SentenceEntry, TuningCorpus};
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, BleuStats, ErrorValue, StatsCache};

/// Breakpoints closer than this are treated as one boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Step taken past the outermost boundary when the best interval is unbounded.
pub const UNBOUNDED_OFFSET: f64 = 1.0;

/// Score of one hypothesis along the ray: `intercept + γ·slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreLine {
    pub intercept: f64,
    pub slope: f64,
    pub hyp_index: usize,
}

impl ScoreLine {
    pub fn at(&self, gamma: f64) -> f64 {
        self.intercept + gamma * self.slope
    }
}

pub fn project_lines(entry: &SentenceEntry, w: &[f64], d: &[f64]) -> Result<Vec<ScoreLine>> {
    let m = entry.hypotheses.first().map_or(0, |h| h.features.len());
    for v in [w, d] {
        if v.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: v.len(),
            });
        }
    }
    Ok(entry
        .hypotheses
        .iter()
        .enumerate()
        .map(|(k, h)| ScoreLine {
            intercept: dot(w, &h.features),
            slope: dot(d, &h.features),
            hyp_index: k,
        })
        .collect())
}

/// Upper envelope of one sentence's score lines.
///
/// `segments[i]` wins on `(breakpoints[i-1], breakpoints[i])`, with the
/// outermost segments extending to ±∞.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEnvelope {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<usize>,
}

impl SentenceEnvelope {
    /// Winning hypothesis at `gamma`; at a breakpoint the right-hand segment.
    pub fn winner_at(&self, gamma: f64) -> usize {
        let i = self.breakpoints.partition_point(|&b| b <= gamma);
        self.segments[i]
    }
}

/// Slope-sorted sweep, O(K log K). Exact score ties go to the lowest
/// `hyp_index`.
pub fn upper_envelope(lines: &[ScoreLine]) -> SentenceEnvelope {
    assert!(!lines.is_empty(), "upper envelope of an empty line set");
    let mut sorted: Vec<ScoreLine> = lines.to_vec();
    sorted.sort_by(|a, b| {
        a.slope
            .total_cmp(&b.slope)
            .then(b.intercept.total_cmp(&a.intercept))
            .then(a.hyp_index.cmp(&b.hyp_index))
    });
    sorted.dedup_by(|later, kept| later.slope == kept.slope);

    // (line, γ where it starts winning)
    let mut hull: Vec<(ScoreLine, f64)> = Vec::with_capacity(sorted.len());
    for line in sorted {
        loop {
            let Some(&(top, start)) = hull.last() else {
                hull.push((line, f64::NEG_INFINITY));
                break;
            };
            let cross = (top.intercept - line.intercept) / (line.slope - top.slope);
            if cross <= start {
                hull.pop();
            } else {
                hull.push((line, cross));
                break;
            }
        }
    }

    SentenceEnvelope {
        breakpoints: hull.iter().skip(1).map(|&(_, x)| x).collect(),
        segments: hull.iter().map(|(l, _)| l.hyp_index).collect(),
    }
}

/// Merged interval structure of the corpus error along one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSweep {
    /// One entry per coalesced boundary: its smallest and largest raw breakpoint.
    spans: Vec<(f64, f64)>,
    pub interval_stats: Vec<BleuStats>,
    pub interval_error: Vec<ErrorValue>,
}

impl IntervalSweep {
    /// Sorted merged critical values (the lower end of each coalesced group).
    pub fn boundaries(&self) -> Vec<f64> {
        self.spans.iter().map(|&(lo, _)| lo).collect()
    }

    pub fn len(&self) -> usize {
        self.interval_error.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interval_error.is_empty()
    }

    /// Open interval `i`, with infinite ends for the outermost ones.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.spans[i - 1].1 };
        let hi = self.spans.get(i).map_or(f64::INFINITY, |&(lo, _)| lo);
        (lo, hi)
    }

    /// The γ picked to stand for interval `i`.
    pub fn representative(&self, i: usize) -> f64 {
        match self.interval(i) {
            (lo, hi) if lo.is_finite() && hi.is_finite() => 0.5 * (lo + hi),
            (lo, _) if lo.is_finite() => lo + UNBOUNDED_OFFSET,
            (_, hi) if hi.is_finite() => hi - UNBOUNDED_OFFSET,
            _ => 0.0,
        }
    }
}

/// Merges per-sentence envelopes and walks the intervals left to right.
pub fn sweep_intervals(envelopes: &[SentenceEnvelope], cache: &StatsCache) -> IntervalSweep {
    let mut current: Vec<usize> = envelopes.iter().map(|e| e.segments[0]).collect();
    let mut stats: BleuStats = current
        .iter()
        .enumerate()
        .map(|(s, &k)| cache.get(s, k))
        .sum();

    // (γ, sentence, segment entered)
    let mut events: Vec<(f64, usize, usize)> = envelopes
        .iter()
        .enumerate()
        .flat_map(|(s, e)| {
            e.breakpoints
                .iter()
                .enumerate()
                .map(move |(i, &g)| (g, s, i + 1))
        })
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut spans: Vec<(f64, f64)> = Vec::new();
    let mut interval_stats = vec![stats];
    let mut i = 0;
    while i < events.len() {
        let lo = events[i].0;
        let mut hi = lo;
        while i < events.len() && events[i].0 - hi <= BOUNDARY_TOLERANCE {
            let (g, s, seg) = events[i];
            let incoming = envelopes[s].segments[seg];
            stats += cache.get(s, incoming);
            stats -= cache.get(s, current[s]);
            current[s] = incoming;
            hi = g;
            i += 1;
        }
        spans.push((lo, hi));
        interval_stats.push(stats);
    }

    let interval_error = interval_stats.iter().map(corpus_bleu).collect();
    IntervalSweep {
        spans,
        interval_stats,
        interval_error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub gamma: f64,
    pub error: ErrorValue,
    /// Interval containing `gamma`; ends may be infinite.
    pub interval: (f64, f64),
    /// Corpus error of the current point (γ = 0).
    pub error_at_zero: ErrorValue,
}

/// Builds the per-sentence envelopes of a ray, optionally in parallel.
pub fn envelopes_along(
    corpus: &TuningCorpus,
    w: &[f64],
    d: &[f64],
    parallel: bool,
) -> Result<Vec<SentenceEnvelope>> {
    let build = |e: &SentenceEntry| project_lines(e, w, d).map(|l| upper_envelope(&l));
    if parallel {
        corpus.entries().par_iter().map(build).collect()
    } else {
        corpus.entries().iter().map(build).collect()
    }
}

/// Exact minimization of the corpus error along `w + γ·d`.
///
/// The lowest-error interval wins; ties go to the interval closest to γ = 0.
/// If that interval is no better than the current point, γ = 0 is returned.
pub fn line_search(
    corpus: &TuningCorpus,
    cache: &StatsCache,
    w: &[f64],
    d: &[f64],
    parallel: bool,
) -> Result<LineSearchResult> {
    if d.len() != corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: corpus.dim(),
            found: d.len(),
        });
    }
    let envelopes = envelopes_along(corpus, w, d, parallel)?;
    let sweep = sweep_intervals(&envelopes, cache);
    Ok(pick_interval(corpus, cache, w, &sweep))
}

fn pick_interval(corpus: &TuningCorpus, cache: &StatsCache, w: &[f64], sweep: &IntervalSweep) -> LineSearchResult {
    let distance_to_zero = |i: usize| {
        let (lo, hi) = sweep.interval(i);
        if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        }
    };

    let mut best = 0;
    for i in 1..sweep.len() {
        let (e, eb) = (sweep.interval_error[i].error, sweep.interval_error[best].error);
        if e < eb || (e == eb && distance_to_zero(i) < distance_to_zero(best)) {
            best = i;
        }
    }

    let at_zero = corpus_bleu(&cache.selection_stats(&crate::kcd::argmax_selection(corpus, w)));
    if sweep.interval_error[best].error < at_zero.error {
        LineSearchResult {
            gamma: sweep.representative(best),
            error: sweep.interval_error[best],
            interval: sweep.interval(best),
            error_at_zero: at_zero,
        }
    } else {
        let containing = (0..sweep.len())
            .find(|&i| distance_to_zero(i) == 0.0)
            .unwrap_or(0);
        LineSearchResult {
            gamma: 0.0,
            error: at_zero,
            interval: sweep.interval(containing),
            error_at_zero: at_zero,
        }
    }
}
