//! Executable checks of the algebraic properties of block segmentation:
//! composition of scales, linearity, identity, properness, large-scale
//! uniformity, asymptotic invertibility, permutation behaviour, blockwise
//! activations and intertwiner scaling.
//!
//! Each `verify_*` function checks one concrete instance and returns a
//! [`LawReport`]. [`run_suite`] draws seeded random instances and
//! aggregates them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    block_count, block_indices, floor_schedule, geometric_schedule, BlockIndex, Grid, GridPoint,
};
use crate::segment::{lift_block, permute, segment_2d, segment_rect, Matrix2D, Permutation};

pub const LINEARITY_RTOL: f64 = 1e-12;
pub const INTERTWINER_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawReport {
    pub law_name: String,
    pub trials: usize,
    pub failures: usize,
    /// First counterexample, present iff `failures > 0`.
    pub witness: Option<String>,
}

impl LawReport {
    pub fn new(law_name: impl Into<String>) -> Self {
        Self {
            law_name: law_name.into(),
            trials: 0,
            failures: 0,
            witness: None,
        }
    }

    pub fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.trials += 1;
        if !ok {
            self.failures += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn absorb(&mut self, other: LawReport) {
        self.trials += other.trials;
        self.failures += other.failures;
        if self.witness.is_none() {
            self.witness = other.witness;
        }
    }
}

fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
    a == b || (a - b).abs() <= rtol * a.abs().max(b.abs())
}

fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

// ---------------------------------------------------------------------------
// composition

/// Cells covered by the partition at `fine`, and by partitioning every block
/// of the `coarse` partition again at `fine`. Row-major boolean masks.
pub fn composition_coverings(
    grid: Grid,
    coarse: usize,
    fine: usize,
) -> Result<(Vec<bool>, Vec<bool>)> {
    grid.check_scale(coarse)?;
    grid.check_scale(fine)?;
    if !coarse.is_multiple_of(fine) {
        return Err(Error::NonNestedScales { coarse, fine });
    }
    let cols = grid.cols();
    let mut direct = vec![false; grid.cells()];
    for idx in block_indices(grid, fine)? {
        mark(&mut direct, cols, idx, fine);
    }
    let mut nested = vec![false; grid.cells()];
    let inner = Grid::new(coarse, coarse)?;
    for outer in block_indices(grid, coarse)? {
        for sub in block_indices(inner, fine)? {
            let idx = BlockIndex::new(outer.p + sub.p - 1, outer.q + sub.q - 1);
            mark(&mut nested, cols, idx, fine);
        }
    }
    Ok((direct, nested))
}

fn mark(mask: &mut [bool], cols: usize, idx: BlockIndex, r: usize) {
    let (r0, c0) = idx.offset();
    for i in r0..r0 + r {
        mask[i * cols + c0..i * cols + c0 + r].fill(true);
    }
}

/// Nested-then-fine covers the same cells as fine directly when the coarse
/// scale tiles the grid; otherwise the two differ only inside the coarse
/// trimmed band, which is narrower than the coarse scale.
pub fn verify_composition_at(grid: Grid, coarse: usize, fine: usize) -> Result<LawReport> {
    let (direct, nested) = composition_coverings(grid, coarse, fine)?;
    let mut report = LawReport::new("composition");
    let cols = grid.cols();
    let band_row = grid.rows() / coarse * coarse;
    let band_col = cols / coarse * coarse;
    let mut offender = None;
    for (cell, (&d, &n)) in direct.iter().zip(&nested).enumerate() {
        if d == n {
            continue;
        }
        let (i, j) = (cell / cols + 1, cell % cols + 1);
        let in_band = i > band_row || j > band_col;
        let allowed = !grid.tiles_perfectly(coarse) && d && !n && in_band;
        if !allowed {
            offender = Some((i, j, d, n));
            break;
        }
    }
    let band_narrow = grid.rows() - band_row < coarse && cols - band_col < coarse;
    report.check(offender.is_none() && band_narrow, || match offender {
        Some((i, j, d, n)) => format!(
            "grid {}x{}, coarse {coarse}, fine {fine}: cell ({i}, {j}) direct={d} nested={n}",
            grid.rows(),
            grid.cols()
        ),
        None => format!(
            "grid {}x{}: trimmed band wider than {coarse}",
            grid.rows(),
            grid.cols()
        ),
    });
    Ok(report)
}

/// Composition along the geometric schedule: scales are indexed from the
/// coarsest, so `r_l` is coarse and `r_{k+l}` is `λ^k` times finer.
pub fn verify_composition(grid: Grid, lambda: u32, k: usize, l: usize) -> Result<LawReport> {
    let schedule = geometric_schedule(grid, lambda)?;
    let coarse = schedule.r_values.get(l).copied();
    let fine = schedule.r_values.get(k + l).copied();
    match (coarse, fine) {
        (Some(coarse), Some(fine)) => verify_composition_at(grid, coarse, fine),
        _ => Err(Error::InvalidScale {
            r: 0,
            rows: grid.rows(),
            cols: grid.cols(),
        }),
    }
}

// ---------------------------------------------------------------------------
// linearity and identity

pub fn verify_linearity(
    w1: &Matrix2D,
    w2: &Matrix2D,
    alpha: f64,
    beta: f64,
    r: usize,
) -> Result<LawReport> {
    let combined = segment_2d(&w1.combine(alpha, w2, beta)?, r)?;
    let p1 = segment_2d(w1, r)?;
    let p2 = segment_2d(w2, r)?;
    let mut mismatch = None;
    'outer: for (((idx, c), (_, b1)), (_, b2)) in
        combined.blocks.iter().zip(&p1.blocks).zip(&p2.blocks)
    {
        let expected = b1.combine(alpha, b2, beta)?;
        for (k, (&got, &want)) in c.values().iter().zip(expected.values()).enumerate() {
            if !rel_close(got, want, LINEARITY_RTOL) {
                mismatch = Some((*idx, k, got, want));
                break 'outer;
            }
        }
    }
    let mut report = LawReport::new("linearity");
    report.check(mismatch.is_none(), || {
        let (idx, k, got, want) = mismatch.expect("failure implies mismatch");
        format!(
            "block ({}, {}) element {k}: {got} vs {want} (alpha={alpha}, beta={beta}, r={r})",
            idx.p, idx.q
        )
    });
    Ok(report)
}

/// Segmenting with the full `m × n` box returns the matrix itself.
pub fn verify_identity(w: &Matrix2D) -> LawReport {
    let blocks = segment_rect(w, w.rows(), w.cols()).expect("full-shape box is always valid");
    let ok = blocks.len() == 1
        && blocks[0].0 == BlockIndex::new(1, 1)
        && bits(blocks[0].1.values()) == bits(w.values());
    let mut report = LawReport::new("identity");
    report.check(ok, || {
        format!(
            "{}x{} matrix not reproduced ({} blocks)",
            w.rows(),
            w.cols(),
            blocks.len()
        )
    });
    report
}

// ---------------------------------------------------------------------------
// properness and uniformity

/// Twice the ℓ¹ diameter of a point set.
fn doubled_diameter(points: &[GridPoint]) -> usize {
    let sums = points.iter().map(|p| p.i + p.j);
    let diffs = points.iter().map(|p| p.i as isize - p.j as isize);
    let spread_sum = sums.clone().max().unwrap_or(0) - sums.min().unwrap_or(0);
    let spread_diff = (diffs.clone().max().unwrap_or(0) - diffs.min().unwrap_or(0)) as usize;
    spread_sum.max(spread_diff)
}

/// Partition blocks that contain at least one of the points, sorted.
pub fn intersecting_blocks(grid: Grid, r: usize, points: &[GridPoint]) -> Result<Vec<BlockIndex>> {
    let (along_rows, along_cols) = grid.blocks_per_axis(r)?;
    for &p in points {
        grid.check_point(p)?;
    }
    let mut out: Vec<BlockIndex> = points
        .iter()
        .map(|&p| BlockIndex::containing(r, p))
        .filter(|b| (b.p - 1) / r < along_rows && (b.q - 1) / r < along_cols)
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// The preimage of a bounded set is bounded: the blocks it touches number at
/// most `(⌈d_U / r⌉ + 2)²` and their union holds `N · r²` cells.
pub fn verify_properness(grid: Grid, r: usize, bounded_set: &[GridPoint]) -> Result<LawReport> {
    let blocks = intersecting_blocks(grid, r, bounded_set)?;
    let doubled = doubled_diameter(bounded_set);
    // ⌈d_U / r⌉ with d_U = doubled / 2
    let reach = doubled.div_ceil(2 * r);
    let bound = (reach + 2) * (reach + 2);

    let mut union = vec![false; grid.cells()];
    for &b in &blocks {
        mark(&mut union, grid.cols(), b, r);
    }
    let cells = union.iter().filter(|&&c| c).count();

    let mut report = LawReport::new("properness");
    report.check(
        blocks.len() <= bound && cells <= blocks.len() * r * r,
        || {
            format!(
            "grid {}x{}, r={r}: {} blocks ({cells} cells) for a set of diameter {}, bound {bound}",
            grid.rows(),
            grid.cols(),
            blocks.len(),
            doubled as f64 / 2.0
        )
        },
    );
    Ok(report)
}

/// Block representative: the top-left corner of the aligned block.
pub fn representative(r: usize, x: GridPoint) -> GridPoint {
    let b = BlockIndex::containing(r, x);
    GridPoint::new(b.p, b.q)
}

/// `d(rep x, rep y) <= d(x, y) + r` for every pair; one trial per pair.
pub fn verify_uniformity(
    grid: Grid,
    r: usize,
    pairs: &[(GridPoint, GridPoint)],
) -> Result<LawReport> {
    grid.check_scale(r)?;
    let mut report = LawReport::new("uniformity");
    for &(x, y) in pairs {
        grid.check_point(x)?;
        grid.check_point(y)?;
        let (rx, ry) = (representative(r, x), representative(r, y));
        let lhs = rx.i.abs_diff(ry.i) + rx.j.abs_diff(ry.j);
        let rhs = x.i.abs_diff(y.i) + x.j.abs_diff(y.j) + 2 * r;
        report.check(lhs <= rhs, || {
            format!("r={r}: x={x:?} y={y:?} reps {rx:?} {ry:?}")
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// invertibility

/// Cells lost by segmenting at `r` and reassembling: `mn − ⌊m/r⌋⌊n/r⌋r²`.
pub fn invertibility_discrepancy(grid: Grid, r: usize) -> Result<usize> {
    Ok(grid.cells() - block_count(grid, r)? * r * r)
}

/// The stated bound `|D| <= 2m + 2n`.
pub fn stated_discrepancy_bound(grid: Grid) -> usize {
    2 * grid.rows() + 2 * grid.cols()
}

/// The band bound `|D| <= (r − 1)(m + n)`, which holds for every scale
/// since each trimmed strip is at most `r − 1` wide.
pub fn band_discrepancy_bound(grid: Grid, r: usize) -> usize {
    r.saturating_sub(1) * (grid.rows() + grid.cols())
}

/// Checks the stated `2m + 2n` bound at each scale. This fails for some
/// scales of four and above: the band is up to `r − 1` wide.
pub fn verify_invertibility(grid: Grid, scales: &[usize]) -> Result<LawReport> {
    let mut report = LawReport::new("invertibility");
    let bound = stated_discrepancy_bound(grid);
    for &r in scales {
        let disc = invertibility_discrepancy(grid, r)?;
        report.check(disc <= bound, || {
            format!(
                "grid {}x{}, r={r}: discrepancy {disc} > 2m+2n = {bound}",
                grid.rows(),
                grid.cols()
            )
        });
    }
    Ok(report)
}

/// Checks the band bound and that the count matches an actual
/// segment/reassemble round trip.
pub fn verify_invertibility_band(w: &Matrix2D, scales: &[usize]) -> Result<LawReport> {
    let grid = w.grid();
    let mut report = LawReport::new("invertibility (band bound)");
    for &r in scales {
        let disc = invertibility_discrepancy(grid, r)?;
        let back = crate::segment::reassemble(&segment_2d(w, r)?)?;
        let [rows, cols] = back.matrix.shape();
        let corner = w.submatrix(0..rows, 0..cols);
        let ok = disc == back.discrepancy_cells
            && disc <= band_discrepancy_bound(grid, r)
            && bits(back.matrix.values()) == bits(corner.values());
        report.check(ok, || {
            format!(
                "grid {}x{}, r={r}: discrepancy {disc}, reassembly {}, band bound {}",
                grid.rows(),
                grid.cols(),
                back.discrepancy_cells,
                band_discrepancy_bound(grid, r)
            )
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// permutations

/// Maps every aligned `r`-group of the covered range onto an aligned group,
/// and the trimmed tail onto itself.
pub fn is_block_aligned(perm: &Permutation, r: usize) -> bool {
    let covered = perm.len() / r * r;
    let groups_ok = (0..covered).step_by(r).all(|start| {
        let target = perm.apply(start);
        target < covered
            && (start..start + r)
                .all(|i| perm.apply(i) < covered && perm.apply(i) / r == target / r)
    });
    groups_ok && (covered..perm.len()).all(|i| perm.apply(i) >= covered)
}

fn sorted_block(values: &[f64]) -> Vec<u64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    bits(&v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationLawReport {
    /// Count, shapes and trimmed cells agree.
    pub strong: LawReport,
    /// Block multiset preserved; only asserted for block-aligned permutations.
    pub weak: LawReport,
    pub block_aligned: bool,
    /// Fraction of block positions whose content multiset changed. Reported
    /// only.
    pub content_divergence: f64,
}

pub fn verify_permutation_laws(
    w: &Matrix2D,
    row_perm: &Permutation,
    col_perm: &Permutation,
    r: usize,
) -> Result<PermutationLawReport> {
    let moved = permute(w, row_perm, col_perm)?;
    let before = segment_2d(w, r)?;
    let after = segment_2d(&moved, r)?;

    let mut strong = LawReport::new("permutation (strong)");
    let same_layout = before.blocks.len() == after.blocks.len()
        && before.trimmed_cell_count == after.trimmed_cell_count
        && before
            .blocks
            .iter()
            .zip(&after.blocks)
            .all(|((i1, b1), (i2, b2))| i1 == i2 && b1.shape() == b2.shape());
    strong.check(same_layout, || {
        format!(
            "{}x{}, r={r}: {} vs {} blocks, trimmed {} vs {}",
            w.rows(),
            w.cols(),
            before.blocks.len(),
            after.blocks.len(),
            before.trimmed_cell_count,
            after.trimmed_cell_count
        )
    });

    let contents = |p: &crate::segment::BlockPartition| -> Vec<Vec<u64>> {
        p.blocks
            .iter()
            .map(|(_, b)| sorted_block(b.values()))
            .collect()
    };
    let c_before = contents(&before);
    let c_after = contents(&after);
    let changed = c_before
        .iter()
        .zip(&c_after)
        .filter(|(a, b)| a != b)
        .count();
    let content_divergence = if c_before.is_empty() {
        0.0
    } else {
        changed as f64 / c_before.len() as f64
    };

    let block_aligned = is_block_aligned(row_perm, r) && is_block_aligned(col_perm, r);
    let mut weak = LawReport::new("permutation (weak, block-aligned)");
    if block_aligned {
        let mut a = c_before;
        let mut b = c_after;
        a.sort_unstable();
        b.sort_unstable();
        weak.check(a == b, || {
            format!("{}x{}, r={r}: block multiset changed", w.rows(), w.cols())
        });
    }
    Ok(PermutationLawReport {
        strong,
        weak,
        block_aligned,
        content_divergence,
    })
}

// ---------------------------------------------------------------------------
// activations and intertwiners

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Per-block activations `σ(W_pq · x[q..q+r] + b[p..p+r])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalActivationSet {
    pub r: usize,
    pub entries: Vec<(BlockIndex, Vec<f64>)>,
}

pub fn fractal_activations(
    w: &Matrix2D,
    b: &[f64],
    x: &[f64],
    r: usize,
    act: Activation,
) -> Result<FractalActivationSet> {
    if b.len() != w.rows() || x.len() != w.cols() {
        return Err(Error::DimensionMismatch(format!(
            "weights {}x{}, bias {}, input {}",
            w.rows(),
            w.cols(),
            b.len(),
            x.len()
        )));
    }
    let partition = segment_2d(w, r)?;
    let entries = partition
        .blocks
        .iter()
        .map(|(idx, block)| {
            let (r0, c0) = idx.offset();
            let z = block.mat_vec(&x[c0..c0 + r])?;
            let h = z
                .iter()
                .zip(&b[r0..r0 + r])
                .map(|(zi, bi)| act.apply(zi + bi))
                .collect();
            Ok((*idx, h))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FractalActivationSet { r, entries })
}

fn check_intertwiner(scale: &[f64], act: Activation) -> Result<()> {
    for (index, &value) in scale.iter().enumerate() {
        let reason = match act {
            Activation::Relu if value.is_nan() || value <= 0.0 => {
                Some("ReLU needs strictly positive scalings")
            }
            Activation::Tanh if value != 1.0 && value != -1.0 => {
                Some("tanh admits only sign flips")
            }
            Activation::Identity if value == 0.0 || !value.is_finite() => {
                Some("scaling must be invertible")
            }
            _ => None,
        };
        if let Some(reason) = reason {
            return Err(Error::InadmissibleScale {
                index,
                value,
                reason,
            });
        }
    }
    Ok(())
}

/// For every lifted block `W̃`: `σ(A W̃ x + A b) = A σ(W̃ x + b)` with
/// `A = diag(scale)`.
pub fn verify_intertwiner(
    w: &Matrix2D,
    b: &[f64],
    x: &[f64],
    r: usize,
    scale: &[f64],
    act: Activation,
) -> Result<LawReport> {
    if b.len() != w.rows() || x.len() != w.cols() || scale.len() != w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "weights {}x{}, bias {}, input {}, scaling {}",
            w.rows(),
            w.cols(),
            b.len(),
            x.len(),
            scale.len()
        )));
    }
    check_intertwiner(scale, act)?;
    let name = match act {
        Activation::Relu => "intertwiner (relu)",
        Activation::Tanh => "intertwiner (tanh)",
        Activation::Identity => "intertwiner (identity)",
    };
    let mut report = LawReport::new(name);
    let partition = segment_2d(w, r)?;
    let mut mismatch = None;
    'outer: for (idx, block) in &partition.blocks {
        let lifted = lift_block(block, *idx, partition.grid)?;
        let z = lifted.mat_vec(x)?;
        for (k, ((zk, bk), ak)) in z.iter().zip(b).zip(scale).enumerate() {
            let pre = zk + bk;
            let lhs = act.apply(ak * zk + ak * bk);
            let rhs = ak * act.apply(pre);
            if !rel_close(lhs, rhs, INTERTWINER_RTOL) {
                mismatch = Some((*idx, k, lhs, rhs));
                break 'outer;
            }
        }
    }
    report.check(mismatch.is_none(), || {
        let (idx, k, lhs, rhs) = mismatch.expect("failure implies mismatch");
        format!("block ({}, {}) row {k}: {lhs} vs {rhs}", idx.p, idx.q)
    });
    Ok(report)
}

// ---------------------------------------------------------------------------
// seeded suites

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Composition,
    Linearity,
    Identity,
    Properness,
    Uniformity,
    Invertibility,
    Permutation,
    Activations,
    Intertwiner,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Composition,
        Suite::Linearity,
        Suite::Identity,
        Suite::Properness,
        Suite::Uniformity,
        Suite::Invertibility,
        Suite::Permutation,
        Suite::Activations,
        Suite::Intertwiner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Composition => "composition",
            Suite::Linearity => "linearity",
            Suite::Identity => "identity",
            Suite::Properness => "properness",
            Suite::Uniformity => "uniformity",
            Suite::Invertibility => "invertibility",
            Suite::Permutation => "permutation",
            Suite::Activations => "activations",
            Suite::Intertwiner => "intertwiner",
        }
    }

    /// A suite name, or `all`.
    pub fn select(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .iter()
            .find(|s| s.name() == name)
            .map(|s| vec![*s])
            .ok_or_else(|| Error::UnknownSuite(name.to_string()))
    }

    fn stream(self) -> u64 {
        Suite::ALL.iter().position(|s| *s == self).expect("listed") as u64 + 1
    }
}

const LAMBDAS: [u32; 5] = [2, 3, 5, 7, 9];

/// Deterministic per-trial generator: independent of how trials are scheduled.
fn trial_rng(seed: u64, suite: Suite, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((suite.stream() << 40) | trial as u64);
    rng
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix2D {
    Matrix2D::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0)).expect("nonzero shape")
}

fn random_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_point(rng: &mut impl Rng, grid: Grid) -> GridPoint {
    GridPoint::new(
        rng.gen_range(1..=grid.rows()),
        rng.gen_range(1..=grid.cols()),
    )
}

fn shuffled(rng: &mut impl Rng, len: usize) -> Permutation {
    let mut map: Vec<usize> = (0..len).collect();
    map.shuffle(rng);
    Permutation::from_zero_based(map).expect("shuffle is a bijection")
}

/// Random permutation that moves aligned `r`-groups onto aligned groups,
/// shuffles within groups and shuffles the trimmed tail among itself.
pub fn block_aligned_permutation(rng: &mut impl Rng, len: usize, r: usize) -> Permutation {
    let groups = len / r;
    let mut order: Vec<usize> = (0..groups).collect();
    order.shuffle(rng);
    let mut map = Vec::with_capacity(len);
    for g in order {
        let mut within: Vec<usize> = (g * r..(g + 1) * r).collect();
        within.shuffle(rng);
        map.extend(within);
    }
    let mut tail: Vec<usize> = (groups * r..len).collect();
    tail.shuffle(rng);
    map.extend(tail);
    Permutation::from_zero_based(map).expect("construction is a bijection")
}

fn collect<F>(name: &str, trials: usize, seed: u64, suite: Suite, f: F) -> Result<LawReport>
where
    F: Fn(&mut ChaCha8Rng) -> Result<LawReport> + Sync,
{
    let parts = (0..trials)
        .into_par_iter()
        .map(|t| f(&mut trial_rng(seed, suite, t)))
        .collect::<Result<Vec<_>>>()?;
    let mut total = LawReport::new(name);
    for part in parts {
        total.absorb(part);
    }
    Ok(total)
}

fn composition_trial(rng: &mut ChaCha8Rng) -> Result<LawReport> {
    loop {
        let lambda = *LAMBDAS.choose(rng).expect("non-empty");
        let (m, n) = if rng.gen_bool(0.5) {
            // divisible grids exercise exact equality
            let base = lambda.pow(rng.gen_range(1..=2)) as usize;
            (base * rng.gen_range(1..=3), base * rng.gen_range(1..=3))
        } else {
            (rng.gen_range(1..=64), rng.gen_range(1..=64))
        };
        let grid = Grid::new(m, n)?;
        let len = geometric_schedule(grid, lambda)?.len();
        if len < 2 {
            continue;
        }
        let l = rng.gen_range(0..len);
        let k = rng.gen_range(0..len - l);
        return verify_composition(grid, lambda, k, l);
    }
}

fn permutation_trials(seed: u64, trials: usize) -> Result<Vec<LawReport>> {
    let strong = collect(
        "permutation (strong)",
        trials,
        seed,
        Suite::Permutation,
        |rng| {
            let (m, n) = (rng.gen_range(1..=24), rng.gen_range(1..=24));
            let r = rng.gen_range(1..=m.min(n));
            let w = random_matrix(rng, m, n);
            Ok(verify_permutation_laws(&w, &shuffled(rng, m), &shuffled(rng, n), r)?.strong)
        },
    )?;
    let aligned_cases = (trials / 5).max(1);
    let weak = collect(
        "permutation (weak, block-aligned)",
        aligned_cases,
        seed ^ 0xA11C,
        Suite::Permutation,
        |rng| {
            let (m, n) = (rng.gen_range(1..=24), rng.gen_range(1..=24));
            let r = rng.gen_range(1..=m.min(n));
            let w = random_matrix(rng, m, n);
            let rp = block_aligned_permutation(rng, m, r);
            let cp = block_aligned_permutation(rng, n, r);
            let report = verify_permutation_laws(&w, &rp, &cp, r)?;
            let mut weak = report.weak;
            if !report.block_aligned {
                weak.check(false, || {
                    format!("constructed permutation not block-aligned at r={r}")
                });
            }
            Ok(weak)
        },
    )?;
    Ok(vec![strong, weak])
}

fn activation_trial(rng: &mut ChaCha8Rng) -> Result<LawReport> {
    let mut report = LawReport::new("fractal activations");
    let m = rng.gen_range(1..=12);
    let w = random_matrix(rng, m, m);
    let b = random_vec(rng, m);
    let x = random_vec(rng, m);
    let act = *[Activation::Relu, Activation::Tanh, Activation::Identity]
        .choose(rng)
        .expect("non-empty");

    // the full block reproduces the layer
    let full = fractal_activations(&w, &b, &x, m, act)?;
    let dense: Vec<f64> = w
        .mat_vec(&x)?
        .iter()
        .zip(&b)
        .map(|(z, bi)| act.apply(z + bi))
        .collect();
    report.check(
        full.entries.len() == 1 && bits(&full.entries[0].1) == bits(&dense),
        || format!("{m}x{m} full block differs from the dense activation"),
    );

    // without a nonlinearity, the blocks of one block-row sum back to Wx + b
    let r = rng.gen_range(1..=m);
    let cols = m / r * r;
    let trimmed = w.submatrix(0..cols, 0..cols);
    let part = fractal_activations(&trimmed, &b[..cols], &x[..cols], r, Activation::Identity)?;
    let per_row = cols / r;
    let want: Vec<f64> = trimmed
        .mat_vec(&x[..cols])?
        .iter()
        .zip(&b)
        .map(|(z, bi)| z + bi)
        .collect();
    let mut got = vec![0.0; cols];
    for (idx, h) in &part.entries {
        for (k, v) in h.iter().enumerate() {
            got[idx.p - 1 + k] += v;
        }
    }
    let extra = (per_row as f64) - 1.0;
    let ok = got
        .iter()
        .zip(&want)
        .zip(&b)
        .all(|((g, w), bi)| (g - extra * bi - w).abs() <= 1e-9 * (1.0 + w.abs()));
    report.check(ok, || {
        format!("{cols}x{cols}, r={r}: row sums do not reconstruct Wx + b")
    });
    Ok(report)
}

fn intertwiner_trial(rng: &mut ChaCha8Rng, act: Activation) -> Result<LawReport> {
    let (m, n) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
    let r = rng.gen_range(1..=m.min(n));
    let w = random_matrix(rng, m, n);
    let b = random_vec(rng, m);
    let x = random_vec(rng, n);
    let scale: Vec<f64> = match act {
        Activation::Tanh => (0..m)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect(),
        _ => (0..m).map(|_| rng.gen_range(0.01..10.0)).collect(),
    };
    verify_intertwiner(&w, &b, &x, r, &scale, act)
}

/// Runs one suite with `trials` seeded random instances per law. Suites
/// with a secondary law run a fifth as many instances of it.
pub fn run_suite(suite: Suite, seed: u64, trials: usize) -> Result<Vec<LawReport>> {
    let reports = match suite {
        Suite::Composition => vec![collect(
            "composition",
            trials,
            seed,
            suite,
            composition_trial,
        )?],
        Suite::Linearity => vec![collect("linearity", trials, seed, suite, |rng| {
            let (m, n) = (rng.gen_range(1..=24), rng.gen_range(1..=24));
            let r = rng.gen_range(1..=m.min(n));
            let w1 = random_matrix(rng, m, n);
            let w2 = random_matrix(rng, m, n);
            verify_linearity(
                &w1,
                &w2,
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                r,
            )
        })?],
        Suite::Identity => vec![collect("identity", trials, seed, suite, |rng| {
            let (m, n) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
            Ok(verify_identity(&random_matrix(rng, m, n)))
        })?],
        Suite::Properness => vec![collect("properness", trials, seed, suite, |rng| {
            let grid = Grid::new(rng.gen_range(1..=64), rng.gen_range(1..=64))?;
            let r = rng.gen_range(1..=grid.min_side());
            let set: Vec<GridPoint> = if rng.gen_bool(0.5) {
                let corner = random_point(rng, grid);
                let h = rng.gen_range(1..=8).min(grid.rows() - corner.i + 1);
                let w = rng.gen_range(1..=8).min(grid.cols() - corner.j + 1);
                (0..h)
                    .flat_map(|di| {
                        (0..w).map(move |dj| GridPoint::new(corner.i + di, corner.j + dj))
                    })
                    .collect()
            } else {
                let k = rng.gen_range(1..=10);
                (0..k).map(|_| random_point(rng, grid)).collect()
            };
            verify_properness(grid, r, &set)
        })?],
        Suite::Uniformity => vec![collect("uniformity", trials, seed, suite, |rng| {
            let grid = Grid::new(rng.gen_range(1..=64), rng.gen_range(1..=64))?;
            let r = rng.gen_range(1..=grid.min_side());
            let pairs: Vec<_> = (0..10)
                .map(|_| (random_point(rng, grid), random_point(rng, grid)))
                .collect();
            verify_uniformity(grid, r, &pairs)
        })?],
        Suite::Invertibility => {
            let stated = collect("invertibility", trials, seed, suite, |rng| {
                let grid = Grid::new(rng.gen_range(1..=64), rng.gen_range(1..=64))?;
                let r = rng
                    .gen_range(1..=grid.min_side() / 2 + 1)
                    .min(grid.min_side());
                verify_invertibility(grid, &[r])
            })?;
            let band = collect(
                "invertibility (band bound)",
                trials,
                seed ^ 0xBA2D,
                suite,
                |rng| {
                    let (m, n) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
                    let w = random_matrix(rng, m, n);
                    let grid = w.grid();
                    let lambda = *LAMBDAS.choose(rng).expect("non-empty");
                    let mut scales = geometric_schedule(grid, lambda)?.r_values;
                    scales.extend(floor_schedule(grid, lambda)?.r_values);
                    verify_invertibility_band(&w, &scales)
                },
            )?;
            vec![stated, band]
        }
        Suite::Permutation => permutation_trials(seed, trials)?,
        Suite::Activations => vec![collect(
            "fractal activations",
            trials,
            seed,
            suite,
            activation_trial,
        )?],
        Suite::Intertwiner => vec![
            collect("intertwiner (relu)", trials, seed, suite, |rng| {
                intertwiner_trial(rng, Activation::Relu)
            })?,
            collect(
                "intertwiner (tanh)",
                (trials / 5).max(1),
                seed ^ 0x7A4,
                suite,
                |rng| intertwiner_trial(rng, Activation::Tanh),
            )?,
        ],
    };
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: usize, n: usize) -> Grid {
        Grid::new(m, n).unwrap()
    }

    fn pt(i: usize, j: usize) -> GridPoint {
        GridPoint::new(i, j)
    }

    fn counting(rows: usize, cols: usize) -> Matrix2D {
        Matrix2D::from_fn(rows, cols, |i, j| (i * cols + j + 1) as f64).unwrap()
    }

    #[test]
    fn composition_divisible_cases() {
        assert!(verify_composition_at(g(64, 64), 8, 2).unwrap().passed());
        assert!(verify_composition_at(g(27, 27), 9, 3).unwrap().passed());
        // geometric indexing on (64, 64), λ = 2: r_3 = 8, r_5 = 2
        let sched = geometric_schedule(g(64, 64), 2).unwrap();
        assert_eq!((sched.r_values[3], sched.r_values[5]), (8, 2));
        assert!(verify_composition(g(64, 64), 2, 2, 3).unwrap().passed());
    }

    #[test]
    fn composition_band_on_ten_by_ten() {
        let (direct, nested) = composition_coverings(g(10, 10), 4, 2).unwrap();
        let diff: Vec<(usize, usize)> = (0..100)
            .filter(|&c| direct[c] != nested[c])
            .map(|c| (c / 10 + 1, c % 10 + 1))
            .collect();
        // direct at r=2 covers everything; nesting inside 4-blocks loses rows/cols 9-10
        assert_eq!(diff.len(), 100 - 64);
        assert!(diff.iter().all(|&(i, j)| i >= 9 || j >= 9));
        assert!(verify_composition_at(g(10, 10), 4, 2).unwrap().passed());
    }

    #[test]
    fn composition_requires_nested_scales() {
        assert!(matches!(
            verify_composition_at(g(12, 12), 4, 3),
            Err(Error::NonNestedScales { .. })
        ));
    }

    #[test]
    fn linearity_cases() {
        let w1 = counting(9, 7);
        let w2 = Matrix2D::from_fn(9, 7, |i, j| ((i * 31 + j * 17) % 13) as f64 - 6.5).unwrap();
        assert!(verify_linearity(&w1, &w2, 1.0, 0.0, 3).unwrap().passed());
        assert!(verify_linearity(&w1, &w2, 0.0, 0.0, 3).unwrap().passed());
        assert!(verify_linearity(&w1, &w2, 2.5, -1.25, 3).unwrap().passed());
        let zero = segment_2d(&w1.combine(0.0, &w2, 0.0).unwrap(), 3).unwrap();
        assert!(zero
            .blocks
            .iter()
            .all(|(_, b)| b.values().iter().all(|v| *v == 0.0)));
        assert!(matches!(
            verify_linearity(&w1, &counting(7, 9), 1.0, 1.0, 3),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn identity_cases() {
        assert!(verify_identity(&counting(1, 1)).passed());
        assert!(verify_identity(&counting(8, 8)).passed());
        assert!(verify_identity(&counting(3, 5)).passed());
    }

    #[test]
    fn properness_cases() {
        let grid = g(20, 20);
        let single = intersecting_blocks(grid, 4, &[pt(6, 6)]).unwrap();
        assert_eq!(single, vec![BlockIndex::new(5, 5)]);

        let patch: Vec<GridPoint> = (3..6).flat_map(|i| (3..6).map(move |j| pt(i, j))).collect();
        let blocks = intersecting_blocks(grid, 4, &patch).unwrap();
        assert_eq!(blocks.len(), 4);
        assert!(verify_properness(grid, 4, &patch).unwrap().passed());

        let all: Vec<GridPoint> = (1..=20)
            .flat_map(|i| (1..=20).map(move |j| pt(i, j)))
            .collect();
        assert_eq!(
            intersecting_blocks(grid, 3, &all).unwrap().len(),
            block_count(grid, 3).unwrap()
        );
        assert!(verify_properness(grid, 3, &all).unwrap().passed());

        assert!(matches!(
            verify_properness(grid, 3, &[pt(21, 1)]),
            Err(Error::OutOfGrid { .. })
        ));
    }

    #[test]
    fn uniformity_cases() {
        let grid = g(64, 64);
        let report = verify_uniformity(
            grid,
            8,
            &[
                (pt(5, 5), pt(5, 5)),
                (pt(1, 1), pt(1, 2)),
                (pt(8, 8), pt(9, 9)),
            ],
        )
        .unwrap();
        assert_eq!(report.trials, 3);
        assert!(report.passed());
        assert_eq!(representative(8, pt(1, 2)), pt(1, 1));
    }

    #[test]
    fn discrepancy_examples() {
        assert_eq!(invertibility_discrepancy(g(8, 8), 2).unwrap(), 0);
        assert_eq!(invertibility_discrepancy(g(10, 10), 3).unwrap(), 19);
        assert_eq!(invertibility_discrepancy(g(5, 7), 2).unwrap(), 11);
        assert!(verify_invertibility(g(10, 10), &[1, 2, 3])
            .unwrap()
            .passed());
    }

    #[test]
    fn stated_discrepancy_bound_breaks_at_r4() {
        // 49 − 16 = 33 > 28
        let report = verify_invertibility(g(7, 7), &[4]).unwrap();
        assert_eq!(report.failures, 1);
        assert!(report.witness.unwrap().contains("33"));
    }

    #[test]
    fn band_bound_holds() {
        let w = counting(7, 13);
        assert!(verify_invertibility_band(&w, &[1, 2, 3, 4, 5, 6, 7])
            .unwrap()
            .passed());
    }

    #[test]
    fn permutation_cases() {
        let w = counting(12, 12);
        let id = Permutation::identity(12);
        let report = verify_permutation_laws(&w, &id, &id, 3).unwrap();
        assert!(report.strong.passed() && report.weak.passed());
        assert_eq!(report.content_divergence, 0.0);

        let rev = Permutation::from_zero_based((0..12).rev().collect()).unwrap();
        let mixed =
            Permutation::from_zero_based(vec![5, 0, 7, 2, 11, 9, 1, 3, 10, 4, 6, 8]).unwrap();
        let report = verify_permutation_laws(&w, &mixed, &rev, 3).unwrap();
        assert!(report.strong.passed());
        assert!(!report.block_aligned);
        assert_eq!(report.weak.trials, 0);

        // rows 1-3 <-> rows 4-6
        let swap = Permutation::from_one_based(&[4, 5, 6, 1, 2, 3, 7, 8, 9, 10, 11, 12]).unwrap();
        assert!(is_block_aligned(&swap, 3));
        let report = verify_permutation_laws(&w, &swap, &id, 3).unwrap();
        assert!(report.block_aligned);
        assert_eq!(report.weak.trials, 1);
        assert!(report.weak.passed());
        assert!(report.content_divergence > 0.0);
    }

    #[test]
    fn alignment_detection() {
        let p = Permutation::from_zero_based(vec![1, 0, 3, 2, 4]).unwrap();
        assert!(is_block_aligned(&p, 2));
        let p = Permutation::from_zero_based(vec![4, 0, 3, 2, 1]).unwrap();
        assert!(!is_block_aligned(&p, 2));
        let p = Permutation::from_zero_based(vec![1, 2, 0, 3]).unwrap();
        assert!(!is_block_aligned(&p, 2));
    }

    #[test]
    fn activation_cases() {
        let w = counting(4, 4);
        let b = vec![0.5, -1.0, 2.0, 0.0];
        let x = vec![1.0, -1.0, 0.5, 0.25];
        let full = fractal_activations(&w, &b, &x, 4, Activation::Relu).unwrap();
        let dense: Vec<f64> = w
            .mat_vec(&x)
            .unwrap()
            .iter()
            .zip(&b)
            .map(|(z, bi)| (z + bi).max(0.0))
            .collect();
        assert_eq!(full.entries.len(), 1);
        assert_eq!(full.entries[0].1, dense);

        let part = fractal_activations(&w, &b, &x, 2, Activation::Identity).unwrap();
        assert_eq!(part.entries.len(), 4);
        let wx = w.mat_vec(&x).unwrap();
        for row in 0..4 {
            let p = row / 2 * 2 + 1;
            let sum: f64 = part
                .entries
                .iter()
                .filter(|(idx, _)| idx.p == p)
                .map(|(_, h)| h[row - (p - 1)])
                .sum();
            // two column blocks each add the bias once
            assert!((sum - b[row] - (wx[row] + b[row])).abs() < 1e-12);
        }

        let zero = fractal_activations(&w, &[0.0; 4], &[0.0; 4], 2, Activation::Relu).unwrap();
        assert!(zero
            .entries
            .iter()
            .all(|(_, h)| h.iter().all(|v| *v == 0.0)));

        assert!(matches!(
            fractal_activations(&w, &[0.0; 3], &x, 2, Activation::Relu),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn intertwiner_cases() {
        let w = Matrix2D::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0).unwrap();
        let b: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let x: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 1.0).collect();
        assert!(
            verify_intertwiner(&w, &b, &x, 3, &[1.0; 6], Activation::Relu)
                .unwrap()
                .passed()
        );
        assert!(
            verify_intertwiner(&w, &b, &x, 3, &[2.0; 6], Activation::Relu)
                .unwrap()
                .passed()
        );
        let signs = [1.0, -1.0, -1.0, 1.0, -1.0, 1.0];
        assert!(verify_intertwiner(&w, &b, &x, 2, &signs, Activation::Tanh)
            .unwrap()
            .passed());

        assert!(matches!(
            verify_intertwiner(
                &w,
                &b,
                &x,
                3,
                &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0],
                Activation::Relu
            ),
            Err(Error::InadmissibleScale { index: 2, .. })
        ));
        assert!(matches!(
            verify_intertwiner(&w, &b, &x, 3, &[2.0; 6], Activation::Tanh),
            Err(Error::InadmissibleScale { .. })
        ));
    }

    #[test]
    fn relu_rejects_sign_flips() {
        let w = Matrix2D::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            verify_intertwiner(&w, &[0.0], &[1.0], 1, &[-1.0], Activation::Relu),
            Err(Error::InadmissibleScale { .. })
        ));
        assert!(
            verify_intertwiner(&w, &[0.0], &[1.0], 1, &[-1.0], Activation::Identity)
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn suites_are_reproducible() {
        let a = run_suite(Suite::Linearity, 9, 25).unwrap();
        let b = run_suite(Suite::Linearity, 9, 25).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].trials, 25);
    }

    #[test]
    fn suite_selection() {
        assert_eq!(Suite::select("all").unwrap().len(), 9);
        assert_eq!(
            Suite::select("permutation").unwrap(),
            vec![Suite::Permutation]
        );
        assert!(matches!(
            Suite::select("nosuch"),
            Err(Error::UnknownSuite(_))
        ));
    }
}
