//! Block segmentation of weight matrices and 4D kernels.
//!
//! A partition at scale `r` keeps only full `r × r` blocks; whatever does not
//! fit along the bottom and right edges is trimmed and accounted for as a
//! cell count. Blocks are owned copies, so partitions are plain values.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{block_indices, BlockIndex, Grid};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix2D {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix2D {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != rows * cols {
            return Err(Error::ValueCount {
                shape: vec![rows, cols],
                expected: rows * cols,
                actual: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.rows, self.cols).expect("matrix dimensions are nonzero")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// 0-based element access.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    /// Copy of the submatrix `rows × cols` (0-based ranges).
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Matrix2D {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for i in rows.clone() {
            values.extend_from_slice(&self.row(i)[cols.clone()]);
        }
        Matrix2D {
            rows: rows.len(),
            cols: cols.len(),
            values,
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Matrix2D, beta: f64) -> Result<Matrix2D> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                left: self.shape().to_vec(),
                right: other.shape().to_vec(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Matrix2D { values, ..*self })
    }

    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }

    pub fn transpose(&self) -> Matrix2D {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                values.push(self.at(i, j));
            }
        }
        Matrix2D {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }
}

/// Row-major tensor of shape `[N, C, k1, k2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4D {
    dims: [usize; 4],
    values: Vec<f64>,
}

impl Tensor4D {
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let dims: [usize; 4] = shape.try_into().map_err(|_| Error::Rank {
            expected: 4,
            shape: shape.to_vec(),
        })?;
        let expected: usize = dims.iter().product();
        if expected == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != expected {
            return Err(Error::ValueCount {
                shape: shape.to_vec(),
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `(N, C)` plane.
    pub fn grid(&self) -> Grid {
        Grid::new(self.dims[0], self.dims[1]).expect("tensor dimensions are nonzero")
    }

    fn fiber_len(&self) -> usize {
        self.dims[2] * self.dims[3]
    }

    /// The `k1 × k2` kernel at 0-based `(n, c)`, flattened.
    pub fn fiber(&self, n: usize, c: usize) -> &[f64] {
        let len = self.fiber_len();
        let start = (n * self.dims[1] + c) * len;
        &self.values[start..start + len]
    }
}

/// Partition of a matrix into full `r × r` blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub r: usize,
    pub grid: Grid,
    pub blocks: Vec<(BlockIndex, Matrix2D)>,
    pub trimmed_cell_count: usize,
}

impl BlockPartition {
    /// 1-based row range of the trimmed band along the bottom edge (may be empty).
    pub fn trimmed_rows(&self) -> Range<usize> {
        trimmed_range(self.grid.rows(), self.r)
    }

    /// 1-based column range of the trimmed band along the right edge (may be empty).
    pub fn trimmed_cols(&self) -> Range<usize> {
        trimmed_range(self.grid.cols(), self.r)
    }
}

fn trimmed_range(len: usize, r: usize) -> Range<usize> {
    (len / r * r + 1)..(len + 1)
}

/// Partition of a 4D tensor whose grid cells carry whole kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition4D {
    pub r: usize,
    pub grid: Grid,
    pub blocks: Vec<(BlockIndex, Tensor4D)>,
    pub trimmed_fiber_count: usize,
}

/// Rectangular segmentation with a `block_rows × block_cols` box. The square
/// case is [`segment_2d`]; the full-shape case is the identity.
pub fn segment_rect(
    w: &Matrix2D,
    block_rows: usize,
    block_cols: usize,
) -> Result<Vec<(BlockIndex, Matrix2D)>> {
    if block_rows == 0 || block_cols == 0 || block_rows > w.rows || block_cols > w.cols {
        return Err(Error::InvalidBlockShape {
            block_rows,
            block_cols,
            rows: w.rows,
            cols: w.cols,
        });
    }
    let along_rows = w.rows / block_rows;
    let along_cols = w.cols / block_cols;
    let mut blocks = Vec::with_capacity(along_rows * along_cols);
    for bi in 0..along_rows {
        for bj in 0..along_cols {
            let r0 = bi * block_rows;
            let c0 = bj * block_cols;
            blocks.push((
                BlockIndex::new(r0 + 1, c0 + 1),
                w.submatrix(r0..r0 + block_rows, c0..c0 + block_cols),
            ));
        }
    }
    Ok(blocks)
}

pub fn segment_2d(w: &Matrix2D, r: usize) -> Result<BlockPartition> {
    let grid = w.grid();
    grid.check_scale(r)?;
    let blocks = segment_rect(w, r, r)?;
    let trimmed_cell_count = grid.cells() - blocks.len() * r * r;
    Ok(BlockPartition {
        r,
        grid,
        blocks,
        trimmed_cell_count,
    })
}

pub fn segment_4d(t: &Tensor4D, r: usize) -> Result<BlockPartition4D> {
    let grid = t.grid();
    let corners = block_indices(grid, r)?;
    let [_, _, k1, k2] = t.dims;
    let blocks = corners
        .into_iter()
        .map(|idx| {
            let (n0, c0) = idx.offset();
            let mut values = Vec::with_capacity(r * r * k1 * k2);
            for n in n0..n0 + r {
                for c in c0..c0 + r {
                    values.extend_from_slice(t.fiber(n, c));
                }
            }
            let block = Tensor4D {
                dims: [r, r, k1, k2],
                values,
            };
            (idx, block)
        })
        .collect::<Vec<_>>();
    let trimmed_fiber_count = grid.cells() - blocks.len() * r * r;
    Ok(BlockPartition4D {
        r,
        grid,
        blocks,
        trimmed_fiber_count,
    })
}

/// Result of stitching a partition back together.
#[derive(Debug, Clone, PartialEq)]
pub struct Reassembly {
    /// The `(M·r) × (N·r)` top-left region of the source.
    pub matrix: Matrix2D,
    /// Cells of the source that the partition did not carry.
    pub discrepancy_cells: usize,
}

pub fn reassemble(p: &BlockPartition) -> Result<Reassembly> {
    let (along_rows, along_cols) = p
        .grid
        .blocks_per_axis(p.r)
        .map_err(|e| Error::InconsistentPartition(e.to_string()))?;
    if p.blocks.len() != along_rows * along_cols {
        return Err(Error::InconsistentPartition(format!(
            "expected {} blocks, found {}",
            along_rows * along_cols,
            p.blocks.len()
        )));
    }
    let rows = along_rows * p.r;
    let cols = along_cols * p.r;
    let mut values = vec![0.0; rows * cols];
    let expected = block_indices(p.grid, p.r)?;
    for ((idx, block), want) in p.blocks.iter().zip(&expected) {
        if idx != want {
            return Err(Error::InconsistentPartition(format!(
                "block at ({}, {}) where ({}, {}) was expected",
                idx.p, idx.q, want.p, want.q
            )));
        }
        if block.shape() != [p.r, p.r] {
            return Err(Error::InconsistentPartition(format!(
                "block at ({}, {}) has shape {:?}",
                idx.p,
                idx.q,
                block.shape()
            )));
        }
        let (r0, c0) = idx.offset();
        for i in 0..p.r {
            let start = (r0 + i) * cols + c0;
            values[start..start + p.r].copy_from_slice(block.row(i));
        }
    }
    let discrepancy_cells = p.grid.cells() - rows * cols;
    if discrepancy_cells != p.trimmed_cell_count {
        return Err(Error::InconsistentPartition(format!(
            "trimmed count {} disagrees with grid remainder {}",
            p.trimmed_cell_count, discrepancy_cells
        )));
    }
    Ok(Reassembly {
        matrix: Matrix2D::new(rows, cols, values)?,
        discrepancy_cells,
    })
}

/// Place a block into an otherwise zero matrix of the grid's shape.
pub fn lift_block(block: &Matrix2D, index: BlockIndex, grid: Grid) -> Result<Matrix2D> {
    if index.p == 0
        || index.q == 0
        || index.p - 1 + block.rows > grid.rows()
        || index.q - 1 + block.cols > grid.cols()
    {
        return Err(Error::OutOfGrid {
            i: index.p,
            j: index.q,
            rows: grid.rows(),
            cols: grid.cols(),
        });
    }
    let (r0, c0) = index.offset();
    let mut out = Matrix2D::zeros(grid.rows(), grid.cols())?;
    for i in 0..block.rows {
        let start = (r0 + i) * grid.cols() + c0;
        out.values[start..start + block.cols].copy_from_slice(block.row(i));
    }
    Ok(out)
}

/// A bijection of `0..len`, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(len: usize) -> Self {
        Self((0..len).collect())
    }

    pub fn from_zero_based(map: Vec<usize>) -> Result<Self> {
        let len = map.len();
        let mut seen = vec![false; len];
        for &v in &map {
            if v >= len {
                return Err(Error::NotAPermutation {
                    len,
                    reason: format!("image {} out of range", v + 1),
                });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::NotAPermutation {
                    len,
                    reason: format!("image {} repeated", v + 1),
                });
            }
        }
        Ok(Self(map))
    }

    /// From a 1-based listing of `1..=len`.
    pub fn from_one_based(map: &[usize]) -> Result<Self> {
        if map.contains(&0) {
            return Err(Error::NotAPermutation {
                len: map.len(),
                reason: "0 is not a 1-based index".into(),
            });
        }
        Self::from_zero_based(map.iter().map(|v| v - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Self(inv)
    }
}

/// `out[i][j] = w[row_perm(i)][col_perm(j)]`.
pub fn permute(w: &Matrix2D, row_perm: &Permutation, col_perm: &Permutation) -> Result<Matrix2D> {
    if row_perm.len() != w.rows || col_perm.len() != w.cols {
        return Err(Error::DimensionMismatch(format!(
            "permutations of length ({}, {}) for a {}x{} matrix",
            row_perm.len(),
            col_perm.len(),
            w.rows,
            w.cols
        )));
    }
    Matrix2D::from_fn(w.rows, w.cols, |i, j| {
        w.at(row_perm.apply(i), col_perm.apply(j))
    })
}
