//! Coordinate descent: exact line searches along each direction of a
//! coordinate system until the corpus error stops moving.

use std::fmt;
use std::str::FromStr;

use crate::corpus::{dot, TuningCorpus};
use crate::envelope::line_search;
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, ErrorValue, StatsCache};
use crate::rss::CoordinateSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Every direction in order, each step applied immediately.
    #[default]
    Sequential,
    /// Search every direction from the same point and apply only the best one.
    BestDirection,
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(SweepMode::Sequential),
            "best-direction" | "best" => Ok(SweepMode::BestDirection),
            other => Err(Error::InvalidConfig(format!("unknown sweep mode {other:?}"))),
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::Sequential => "sequential",
            SweepMode::BestDirection => "best-direction",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KcdConfig {
    /// Stop once two consecutive sweeps differ by at most this much error (1 - BLEU scale).
    pub epsilon: f64,
    /// Upper bound on the number of sweeps.
    pub max_iter: usize,
    pub sweep_mode: SweepMode,
    /// Build per-sentence envelopes on the rayon pool.
    pub parallel: bool,
}

impl Default for KcdConfig {
    fn default() -> Self {
        KcdConfig {
            epsilon: 0.001,
            max_iter: 25,
            sweep_mode: SweepMode::Sequential,
            parallel: true,
        }
    }
}

impl KcdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// One applied line-search step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iter: usize,
    pub dim: usize,
    pub gamma: f64,
    /// Corpus error after the step.
    pub error: ErrorValue,
    /// Feature-space weights after the step.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KcdTrace {
    pub initial_error: ErrorValue,
    pub steps: Vec<StepRecord>,
    /// Number of completed sweeps.
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KcdRun {
    pub weights: Vec<f64>,
    pub error: ErrorValue,
    pub trace: KcdTrace,
}

fn check_dim(corpus: &TuningCorpus, w: &[f64]) -> Result<()> {
    if w.len() != corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: corpus.dim(),
            found: w.len(),
        });
    }
    Ok(())
}

/// Index of the best-scoring hypothesis; ties keep the earliest.
pub(crate) fn argmax_selection(corpus: &TuningCorpus, w: &[f64]) -> Vec<usize> {
    corpus
        .entries()
        .iter()
        .map(|e| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (k, h) in e.hypotheses.iter().enumerate() {
                let score = dot(w, &h.features);
                if score > best_score {
                    best = k;
                    best_score = score;
                }
            }
            best
        })
        .collect()
}

/// Hypothesis chosen for each sentence under the weights `w`.
pub fn select_hypotheses(corpus: &TuningCorpus, w: &[f64]) -> Result<Vec<usize>> {
    check_dim(corpus, w)?;
    Ok(argmax_selection(corpus, w))
}

/// Corpus error of the selection made by `w`.
pub fn evaluate(corpus: &TuningCorpus, cache: &StatsCache, w: &[f64]) -> Result<ErrorValue> {
    let selection = select_hypotheses(corpus, w)?;
    Ok(corpus_bleu(&cache.selection_stats(&selection)))
}

/// Uniform `1/M` starting weights.
pub fn uniform_weights(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

struct Step {
    dim: usize,
    gamma: f64,
    weights: Vec<f64>,
    error: ErrorValue,
}

/// Line search along `d` from `w`, re-checked by direct selection at the new point.
fn search_direction(
    corpus: &TuningCorpus,
    cache: &StatsCache,
    w: &[f64],
    d: &[f64],
    dim: usize,
    current: ErrorValue,
    parallel: bool,
) -> Result<Step> {
    let found = line_search(corpus, cache, w, d, parallel)?;
    let stay = Step {
        dim,
        gamma: 0.0,
        weights: w.to_vec(),
        error: current,
    };
    if found.gamma == 0.0 {
        return Ok(stay);
    }
    let moved: Vec<f64> = w.iter().zip(d).map(|(wi, di)| wi + found.gamma * di).collect();
    let error = evaluate(corpus, cache, &moved)?;
    // floating-point disagreement inside a near-degenerate interval
    if error.error > current.error {
        log::debug!(
            "rejecting step along direction {dim}: predicted error {}, evaluated {}",
            found.error.error,
            error.error
        );
        return Ok(stay);
    }
    Ok(Step {
        dim,
        gamma: found.gamma,
        weights: moved,
        error,
    })
}

/// Coordinate descent from `init_w` along the directions of `system`.
///
/// Weights always stay in feature space: a step along direction `d` updates
/// `w ← w + γ·d`.
pub fn kcd_optimize(
    corpus: &TuningCorpus,
    cache: &StatsCache,
    init_w: &[f64],
    system: &CoordinateSystem,
    config: &KcdConfig,
) -> Result<KcdRun> {
    config.validate()?;
    check_dim(corpus, init_w)?;
    if system.dim() != corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: corpus.dim(),
            found: system.dim(),
        });
    }

    let active: Vec<usize> = (0..system.len())
        .filter(|&m| {
            let zero = system.direction(m).iter().all(|&x| x == 0.0);
            if zero {
                log::warn!("direction {m} is the zero vector; skipping it");
            }
            !zero
        })
        .collect();

    let mut w = init_w.to_vec();
    let initial_error = evaluate(corpus, cache, &w)?;
    let mut current = initial_error;
    let mut steps = Vec::new();

    let mut last_error;
    let mut new_error = 1.0;
    let mut iter = 0;
    let converged = loop {
        iter += 1;
        match config.sweep_mode {
            SweepMode::Sequential => {
                for &m in &active {
                    let step = search_direction(corpus, cache, &w, system.direction(m), m, current, config.parallel)?;
                    w = step.weights;
                    current = step.error;
                    steps.push(StepRecord {
                        iter,
                        dim: step.dim,
                        gamma: step.gamma,
                        error: current,
                        weights: w.clone(),
                    });
                }
            }
            SweepMode::BestDirection => {
                let mut best: Option<Step> = None;
                for &m in &active {
                    let step = search_direction(corpus, cache, &w, system.direction(m), m, current, config.parallel)?;
                    if best.as_ref().is_none_or(|b| step.error.error < b.error.error) {
                        best = Some(step);
                    }
                }
                if let Some(step) = best {
                    w = step.weights;
                    current = step.error;
                    steps.push(StepRecord {
                        iter,
                        dim: step.dim,
                        gamma: step.gamma,
                        error: current,
                        weights: w.clone(),
                    });
                }
            }
        }
        last_error = new_error;
        new_error = current.error;
        let settled = (last_error - new_error).abs() <= config.epsilon;
        if settled || iter >= config.max_iter {
            break settled;
        }
    };

    Ok(KcdRun {
        weights: w,
        error: current,
        trace: KcdTrace {
            initial_error,
            steps,
            iterations: iter,
            converged,
        },
    })
}
