//! Rotated coordinate systems and the α grid search over them.
//!
//! A rotation moves search direction `A` toward feature `B`: the direction
//! becomes `e_A + α·e_B`, which makes an angle of `atan(α)` with the original
//! axis inside the A-B plane. For every α on a grid, coordinate descent runs on
//! the tuning (closed) set from the same initial weights, and the α with the
//! best closed-set BLEU is selected. Test-set (open) BLEU is recorded next to
//! it but never used for the choice.

use rayon::prelude::*;

use crate::corpus::{check_same_dim, TuningCorpus};
use crate::error::{Error, Result};
use crate::kcd::{evaluate, kcd_optimize, KcdConfig, KcdRun};
use crate::metrics::{ErrorValue, StatsCache};

/// Grid values are rounded to this many decimals so that e.g. -0.3 and +0.3
/// are exact mirror images.
const GRID_DECIMALS: i32 = 12;
const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    /// Direction being moved (the main feature).
    pub from_dim: usize,
    /// Feature it is moved toward (the subsidiary feature).
    pub to_dim: usize,
    pub alpha: f64,
}

impl Rotation {
    /// Angle in degrees between the rotated direction and its original axis.
    pub fn angle_degrees(&self) -> f64 {
        self.alpha.atan().to_degrees()
    }
}

/// Search directions in feature space, one per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSystem {
    directions: Vec<Vec<f64>>,
    provenance: Vec<Rotation>,
}

impl CoordinateSystem {
    /// The standard basis: direction `m` is the unit vector of feature `m`.
    pub fn identity(m: usize) -> Self {
        let directions = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        CoordinateSystem {
            directions,
            provenance: Vec::new(),
        }
    }

    /// Arbitrary square direction set. Zero directions are allowed here; the
    /// optimizer skips them.
    pub fn from_directions(directions: Vec<Vec<f64>>) -> Result<Self> {
        let m = directions.len();
        if let Some(bad) = directions.iter().find(|d| d.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: bad.len(),
            });
        }
        Ok(CoordinateSystem {
            directions,
            provenance: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn direction(&self, m: usize) -> &[f64] {
        &self.directions[m]
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn provenance(&self) -> &[Rotation] {
        &self.provenance
    }

    /// Replaces direction `A` by `e_A + α·e_B` (unnormalized).
    ///
    /// Direction `A` must not have been rotated before; being the target of an
    /// earlier rotation is fine.
    pub fn rotate(&self, r: Rotation) -> Result<Self> {
        let m = self.dim();
        if r.from_dim >= m || r.to_dim >= m {
            return Err(Error::InvalidRotation(format!(
                "dimensions {} -> {} out of range for {m} features",
                r.from_dim, r.to_dim
            )));
        }
        if r.from_dim == r.to_dim {
            return Err(Error::InvalidRotation(format!(
                "cannot rotate dimension {} toward itself",
                r.from_dim
            )));
        }
        if !r.alpha.is_finite() {
            return Err(Error::InvalidRotation(format!("alpha {} is not finite", r.alpha)));
        }
        if self.provenance.iter().any(|p| p.from_dim == r.from_dim) {
            return Err(Error::InvalidRotation(format!(
                "dimension {} has already been rotated",
                r.from_dim
            )));
        }
        let mut next = self.clone();
        let d = &mut next.directions[r.from_dim];
        for (j, x) in d.iter_mut().enumerate() {
            let unit_a = if j == r.from_dim { 1.0 } else { 0.0 };
            let unit_b = if j == r.to_dim { 1.0 } else { 0.0 };
            *x = unit_a + r.alpha * unit_b;
        }
        next.provenance.push(r);
        Ok(next)
    }
}

pub fn identity_system(m: usize) -> CoordinateSystem {
    CoordinateSystem::identity(m)
}

pub fn apply_rotation(cs: &CoordinateSystem, r: Rotation) -> Result<CoordinateSystem> {
    cs.rotate(r)
}

/// Arithmetic α grid from `start` to `end`; 0 is always a member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid {
            start: -1.0,
            end: 1.0,
            step: 0.1,
        }
    }
}

fn round_grid(x: f64) -> f64 {
    let scale = 10f64.powi(GRID_DECIMALS);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl AlphaGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        let grid = AlphaGrid { start, end, step };
        grid.points()?;
        Ok(grid)
    }

    /// The single-point grid {0}.
    pub fn zero() -> Self {
        AlphaGrid {
            start: 0.0,
            end: 0.0,
            step: 1.0,
        }
    }

    /// Sorted grid points: `start, start + step, …` up to `end` (inclusive
    /// within 1e-12), plus 0 if the progression misses it.
    pub fn points(&self) -> Result<Vec<f64>> {
        let AlphaGrid { start, end, step } = *self;
        if !(start.is_finite() && end.is_finite() && step.is_finite()) {
            return Err(Error::GridEmpty("bounds and step must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::GridEmpty(format!("step must be positive, got {step}")));
        }
        if start > end {
            return Err(Error::GridEmpty(format!("start {start} exceeds end {end}")));
        }
        let span = (end - start) / step;
        if span >= MAX_GRID_POINTS as f64 {
            return Err(Error::GridEmpty(format!("more than {MAX_GRID_POINTS} grid points")));
        }
        let count = (span + 1e-9).floor() as usize + 1;
        let mut points: Vec<f64> = (0..count).map(|i| round_grid(start + i as f64 * step)).collect();
        if !points.iter().any(|&a| a.abs() <= 1e-12) {
            points.push(0.0);
            points.sort_by(f64::total_cmp);
        }
        Ok(points)
    }
}

/// Which rotations to apply: one gridded pair, plus rotations held at fixed α.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationPlan {
    pub from_dim: usize,
    pub to_dim: usize,
    pub fixed: Vec<Rotation>,
}

impl RotationPlan {
    pub fn single(from_dim: usize, to_dim: usize) -> Self {
        RotationPlan {
            from_dim,
            to_dim,
            fixed: Vec::new(),
        }
    }

    /// Coordinate system for one grid value.
    pub fn system(&self, m: usize, alpha: f64) -> Result<CoordinateSystem> {
        let mut cs = CoordinateSystem::identity(m).rotate(Rotation {
            from_dim: self.from_dim,
            to_dim: self.to_dim,
            alpha,
        })?;
        for &r in &self.fixed {
            cs = cs.rotate(r)?;
        }
        Ok(cs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRecord {
    pub alpha: f64,
    pub weights: Vec<f64>,
    /// Tuning-set score of the final weights.
    pub closed: ErrorValue,
    /// Test-set score of the final weights.
    pub open: ErrorValue,
    pub run: KcdRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RssResult {
    /// One record per grid point, in ascending α.
    pub records: Vec<AlphaRecord>,
    pub selected: usize,
    /// Index of the α = 0 record.
    pub baseline: usize,
}

impl RssResult {
    pub fn selected(&self) -> &AlphaRecord {
        &self.records[self.selected]
    }

    pub fn baseline(&self) -> &AlphaRecord {
        &self.records[self.baseline]
    }

    pub fn selected_alpha(&self) -> f64 {
        self.selected().alpha
    }
}

/// A corpus together with its per-hypothesis BLEU statistics.
#[derive(Debug, Clone)]
pub struct ScoredCorpus {
    pub corpus: TuningCorpus,
    pub stats: StatsCache,
}

impl ScoredCorpus {
    pub fn new(corpus: TuningCorpus) -> Self {
        let stats = StatsCache::build(&corpus);
        ScoredCorpus { corpus, stats }
    }

    pub fn evaluate(&self, w: &[f64]) -> Result<ErrorValue> {
        evaluate(&self.corpus, &self.stats, w)
    }
}

/// Picks the record with the best closed BLEU; ties go to the smallest |α|,
/// then to the negative α.
fn select_best(records: &[AlphaRecord]) -> usize {
    let key = |r: &AlphaRecord| (r.alpha.abs(), r.alpha);
    let mut best = 0;
    for (i, r) in records.iter().enumerate().skip(1) {
        let b = &records[best];
        let better = r.closed.bleu > b.closed.bleu
            || (r.closed.bleu == b.closed.bleu && key(r).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less));
        if better {
            best = i;
        }
    }
    best
}

/// Coordinate descent once per α, then selection by tuning-set BLEU.
pub fn rss_optimize(
    closed: &ScoredCorpus,
    open: &ScoredCorpus,
    init_w: &[f64],
    plan: &RotationPlan,
    grid: &AlphaGrid,
    config: &KcdConfig,
) -> Result<RssResult> {
    check_same_dim(&closed.corpus, &open.corpus)?;
    config.validate()?;
    let m = closed.corpus.dim();
    let alphas = grid.points()?;
    // validate the plan once up front so errors are not per-α
    plan.system(m, 0.0)?;

    let run_one = |alpha: f64| -> Result<AlphaRecord> {
        let system = plan.system(m, alpha)?;
        let run = kcd_optimize(&closed.corpus, &closed.stats, init_w, &system, config)?;
        let closed_score = closed.evaluate(&run.weights)?;
        let open_score = open.evaluate(&run.weights)?;
        Ok(AlphaRecord {
            alpha,
            weights: run.weights.clone(),
            closed: closed_score,
            open: open_score,
            run,
        })
    };
    let records: Vec<AlphaRecord> = if config.parallel {
        alphas.par_iter().map(|&a| run_one(a)).collect::<Result<_>>()?
    } else {
        alphas.iter().map(|&a| run_one(a)).collect::<Result<_>>()?
    };

    let baseline = records
        .iter()
        .position(|r| r.alpha == 0.0)
        .expect("alpha grid always contains 0");
    let selected = select_best(&records);
    Ok(RssResult {
        records,
        selected,
        baseline,
    })
}
