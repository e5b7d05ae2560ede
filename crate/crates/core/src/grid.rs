//! The index lattice of a weight matrix, its ℓ¹ coarse structure, and the
//! box-size schedules used for box counting.
//!
//! Grid coordinates are 1-based throughout this module: a grid with `rows`
//! rows and `cols` columns contains the points `(i, j)` with
//! `1 <= i <= rows` and `1 <= j <= cols`. Blocks are addressed by their
//! top-left corner and enumerated row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index lattice of a layer's segmentation plane.
///
/// For a dense layer this is the matrix shape; for a convolution kernel
/// `[N, C, k1, k2]` it is the `(N, C)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    /// Grid of the first two axes of a rank-2 or rank-4 shape.
    pub fn from_shape(shape: &[usize]) -> Result<Self> {
        match shape {
            [rows, cols] | [rows, cols, _, _] => Self::new(*rows, *cols),
            _ => Err(Error::Rank {
                expected: 2,
                shape: shape.to_vec(),
            }),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn min_side(&self) -> usize {
        self.rows.min(self.cols)
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        (1..=self.rows).contains(&p.i) && (1..=self.cols).contains(&p.j)
    }

    pub fn check_point(&self, p: GridPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfGrid {
                i: p.i,
                j: p.j,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Largest distance between two points, i.e. between opposite corners.
    /// Equal to half the unweighted span `(m - 1) + (n - 1)`.
    pub fn diameter(&self) -> f64 {
        0.5 * ((self.rows - 1) + (self.cols - 1)) as f64
    }

    pub fn check_scale(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.min_side() {
            return Err(Error::InvalidScale {
                r,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    /// Number of full blocks along each axis, `(⌊m/r⌋, ⌊n/r⌋)`.
    pub fn blocks_per_axis(&self, r: usize) -> Result<(usize, usize)> {
        self.check_scale(r)?;
        Ok((self.rows / r, self.cols / r))
    }

    /// True when `r` divides both sides.
    pub fn tiles_perfectly(&self, r: usize) -> bool {
        r != 0 && self.rows.is_multiple_of(r) && self.cols.is_multiple_of(r)
    }
}

/// A 1-based lattice point `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub i: usize,
    pub j: usize,
}

impl GridPoint {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl From<(usize, usize)> for GridPoint {
    fn from((i, j): (usize, usize)) -> Self {
        Self { i, j }
    }
}

/// Twice the ℓ¹ distance, kept integral.
fn doubled_distance(a: GridPoint, b: GridPoint) -> usize {
    a.i.abs_diff(b.i) + a.j.abs_diff(b.j)
}

/// `½(|i₁ − i₂| + |j₁ − j₂|)`. Always a half-integer, so the result is exact.
pub fn l1_distance(a: GridPoint, b: GridPoint) -> f64 {
    doubled_distance(a, b) as f64 * 0.5
}

/// Membership of `(a, b)` in the controlled set `E_r = {d(a, b) <= r}`.
pub fn entourage_contains(r: usize, a: GridPoint, b: GridPoint) -> bool {
    doubled_distance(a, b) <= 2 * r
}

/// The strict variant `d(a, b) < r` used for bounded tiles. Kept apart from
/// [`entourage_contains`] on purpose; the two predicates differ on the
/// sphere `d = r`.
pub fn within_tile_radius(r: usize, a: GridPoint, b: GridPoint) -> bool {
    doubled_distance(a, b) < 2 * r
}

/// Top-left corner `(p, q)` of an aligned block, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockIndex {
    pub p: usize,
    pub q: usize,
}

impl BlockIndex {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q }
    }

    /// 0-based `(row, col)` offset of the corner.
    pub fn offset(&self) -> (usize, usize) {
        (self.p - 1, self.q - 1)
    }

    /// Whether the 1-based point lies in the `r × r` block anchored here.
    pub fn covers(&self, r: usize, point: GridPoint) -> bool {
        (self.p..self.p + r).contains(&point.i) && (self.q..self.q + r).contains(&point.j)
    }

    /// Corner of the aligned `r`-block the point falls into. Points in the
    /// trimmed band map to a corner whose block is not part of the partition.
    pub fn containing(r: usize, point: GridPoint) -> Self {
        Self {
            p: (point.i - 1) / r * r + 1,
            q: (point.j - 1) / r * r + 1,
        }
    }
}

/// All full `r × r` block corners, row-major.
pub fn block_indices(grid: Grid, r: usize) -> Result<Vec<BlockIndex>> {
    let (along_rows, along_cols) = grid.blocks_per_axis(r)?;
    let mut out = Vec::with_capacity(along_rows * along_cols);
    for bi in 0..along_rows {
        for bj in 0..along_cols {
            out.push(BlockIndex::new(bi * r + 1, bj * r + 1));
        }
    }
    Ok(out)
}

/// Cover count `N(r) = ⌊m/r⌋ · ⌊n/r⌋`.
pub fn block_count(grid: Grid, r: usize) -> Result<usize> {
    let (along_rows, along_cols) = grid.blocks_per_axis(r)?;
    Ok(along_rows * along_cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Powers of λ up to `min(m, n)`.
    #[default]
    Geometric,
    /// `⌊r₀ / λ^k⌋` with `r₀ = min(m, n)`.
    FloorDecay,
}

impl ScheduleKind {
    pub fn schedule(self, grid: Grid, lambda: u32) -> Result<ScaleSchedule> {
        match self {
            ScheduleKind::Geometric => geometric_schedule(grid, lambda),
            ScheduleKind::FloorDecay => floor_schedule(grid, lambda),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Geometric => "geometric",
            ScheduleKind::FloorDecay => "floor",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "geometric" => Ok(ScheduleKind::Geometric),
            "floor" | "floor_decay" | "floor-decay" => Ok(ScheduleKind::FloorDecay),
            other => Err(format!(
                "unknown schedule {other:?} (expected geometric or floor)"
            )),
        }
    }
}

/// Box sizes for one dilation factor, strictly decreasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub lambda: u32,
    pub kind: ScheduleKind,
    pub r_values: Vec<usize>,
}

impl ScaleSchedule {
    pub fn len(&self) -> usize {
        self.r_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_values.is_empty()
    }

    /// Every scale divides both grid sides.
    pub fn tiles_perfectly(&self, grid: Grid) -> bool {
        self.r_values.iter().all(|&r| grid.tiles_perfectly(r))
    }
}

fn check_lambda(lambda: u32) -> Result<()> {
    if lambda < 2 {
        return Err(Error::InvalidLambda(lambda));
    }
    Ok(())
}

pub fn geometric_schedule(grid: Grid, lambda: u32) -> Result<ScaleSchedule> {
    check_lambda(lambda)?;
    let max_box = grid.min_side();
    let mut r_values = Vec::new();
    let mut r = 1usize;
    while r <= max_box {
        r_values.push(r);
        match r.checked_mul(lambda as usize) {
            Some(next) => r = next,
            None => break,
        }
    }
    r_values.reverse();
    Ok(ScaleSchedule {
        lambda,
        kind: ScheduleKind::Geometric,
        r_values,
    })
}

pub fn floor_schedule(grid: Grid, lambda: u32) -> Result<ScaleSchedule> {
    check_lambda(lambda)?;
    let mut r_values: Vec<usize> = Vec::new();
    let mut r = grid.min_side();
    while r > 0 {
        if r_values.last() != Some(&r) {
            r_values.push(r);
        }
        r /= lambda as usize;
    }
    Ok(ScaleSchedule {
        lambda,
        kind: ScheduleKind::FloorDecay,
        r_values,
    })
}
