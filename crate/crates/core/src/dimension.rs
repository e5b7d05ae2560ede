//! Box-counting dimension: count blocks at each scale of a schedule, fit
//! `ln N(r)` against `ln r` by ordinary least squares, report `D = -slope`.
//!
//! `N(r)` counts every full block, so an estimate depends on the grid shape
//! and schedule only, never on tensor values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{block_count, Grid, ScaleSchedule, ScheduleKind};
use crate::io::LayerKind;

/// Tolerance for calling an estimate Euclidean.
pub const EUCLIDEAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    /// `(ln r, ln N)` in input order, after dropping `N = 0`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LogLogFit {
    pub fn predict(&self, ln_r: f64) -> f64 {
        self.intercept + self.slope * ln_r
    }
}

/// OLS fit of `ln N` on `ln r` over the pairs with `N > 0`.
pub fn fit_loglog(pairs: &[(usize, usize)]) -> Result<LogLogFit> {
    let valid: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|&(r, n)| r > 0 && n > 0)
        .collect();
    let mut distinct: Vec<usize> = valid.iter().map(|&(r, _)| r).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientPoints {
            valid: distinct.len(),
        });
    }

    let points: Vec<(f64, f64)> = valid
        .iter()
        .map(|&(r, n)| ((r as f64).ln(), (n as f64).ln()))
        .collect();
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LogLogFit {
        points,
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub lambda: u32,
    pub schedule: ScaleSchedule,
    /// `N(r)` for each entry of `schedule.r_values`.
    pub counts: Vec<usize>,
    pub fit: LogLogFit,
    pub dimension: f64,
}

/// `(r, N(r))` for every scale of the schedule.
pub fn box_counts(grid: Grid, schedule: &ScaleSchedule) -> Result<Vec<(usize, usize)>> {
    schedule
        .r_values
        .iter()
        .map(|&r| Ok((r, block_count(grid, r)?)))
        .collect()
}

pub fn estimate_with_schedule(grid: Grid, schedule: ScaleSchedule) -> Result<DimensionEstimate> {
    let pairs = box_counts(grid, &schedule)?;
    let fit = fit_loglog(&pairs)?;
    Ok(DimensionEstimate {
        lambda: schedule.lambda,
        counts: pairs.iter().map(|p| p.1).collect(),
        dimension: -fit.slope,
        fit,
        schedule,
    })
}

pub fn estimate_dimension(
    grid: Grid,
    lambda: u32,
    kind: ScheduleKind,
) -> Result<DimensionEstimate> {
    estimate_with_schedule(grid, kind.schedule(grid, lambda)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// `D = 2`.
    Euclidean,
    /// `D > 2` (or any other departure from 2).
    Fractal,
}

/// Divisibility versus dimension for one grid and schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilingVerdict {
    pub perfect_tiling: bool,
    pub dimension: f64,
    pub classification: Classification,
}

impl TilingVerdict {
    /// Whether the divisible-iff-Euclidean dichotomy holds for this case.
    pub fn consistent(&self) -> bool {
        self.perfect_tiling == (self.classification == Classification::Euclidean)
    }
}

pub fn classify(grid: Grid, estimate: &DimensionEstimate) -> TilingVerdict {
    let classification = if (estimate.dimension - 2.0).abs() <= EUCLIDEAN_TOLERANCE {
        Classification::Euclidean
    } else {
        Classification::Fractal
    };
    TilingVerdict {
        perfect_tiling: estimate.schedule.tiles_perfectly(grid),
        dimension: estimate.dimension,
        classification,
    }
}

pub fn classify_schedule(grid: Grid, schedule: &ScaleSchedule) -> Result<TilingVerdict> {
    let estimate = estimate_with_schedule(grid, schedule.clone())?;
    Ok(classify(grid, &estimate))
}

/// Outcome for one dilation factor: an estimate, or the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LambdaOutcome {
    Estimated(DimensionEstimate),
    Skipped {
        schedule: ScaleSchedule,
        reason: String,
    },
}

impl LambdaOutcome {
    pub fn estimate(&self) -> Option<&DimensionEstimate> {
        match self {
            LambdaOutcome::Estimated(e) => Some(e),
            LambdaOutcome::Skipped { .. } => None,
        }
    }

    pub fn dimension(&self) -> Option<f64> {
        self.estimate().map(|e| e.dimension)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub layer_name: String,
    pub kind: LayerKind,
    pub grid: Grid,
    pub estimates: BTreeMap<u32, LambdaOutcome>,
}

pub fn profile_layer(
    name: &str,
    kind: LayerKind,
    grid: Grid,
    lambdas: &[u32],
    schedule: ScheduleKind,
) -> Result<LayerProfile> {
    if lambdas.is_empty() {
        return Err(Error::EmptyLambdas);
    }
    let mut estimates = BTreeMap::new();
    for &lambda in lambdas {
        let sched = schedule.schedule(grid, lambda)?;
        let outcome = match estimate_with_schedule(grid, sched.clone()) {
            Ok(estimate) => LambdaOutcome::Estimated(estimate),
            Err(err @ Error::InsufficientPoints { .. }) => LambdaOutcome::Skipped {
                schedule: sched,
                reason: err.to_string(),
            },
            Err(other) => return Err(other),
        };
        estimates.insert(lambda, outcome);
    }
    Ok(LayerProfile {
        layer_name: name.to_string(),
        kind,
        grid,
        estimates,
    })
}
