use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Equal-size partition of `0..dim` into contiguous blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    block_count: usize,
    block_size: usize,
}

impl BlockPartition {
    pub fn new(block_count: usize, block_size: usize) -> Self {
        Self { block_count, block_size }
    }

    /// Level `level` of a rank-`rank` HSS hierarchy: `2^level` blocks of
    /// size `2 * rank`.
    pub fn hss_level(level: usize, rank: usize) -> Self {
        Self::new(1 << level, 2 * rank)
    }

    /// `dim` split into `block_count` equal blocks.
    pub fn uniform(dim: usize, block_count: usize) -> Result<Self> {
        if block_count == 0 || !dim.is_multiple_of(block_count) {
            return Err(Error::InvalidParameter(format!(
                "cannot split dimension {dim} into {block_count} equal blocks"
            )));
        }
        Ok(Self::new(block_count, dim / block_count))
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn dim(&self) -> usize {
        self.block_count * self.block_size
    }

    pub fn offset(&self, i: usize) -> usize {
        i * self.block_size
    }
}

fn check_square(a: &DenseMatrix, part: &BlockPartition, i: usize) -> Result<()> {
    if !a.is_square() || a.rows() != part.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix against a partition of dimension {}",
            a.rows(),
            a.cols(),
            part.dim()
        )));
    }
    if i >= part.block_count() {
        return Err(Error::InvalidParameter(format!(
            "block {i} out of range for {} blocks",
            part.block_count()
        )));
    }
    Ok(())
}

/// Row block `i` of `a` with its diagonal block removed.
pub fn hss_block_row(a: &DenseMatrix, part: &BlockPartition, i: usize) -> Result<DenseMatrix> {
    check_square(a, part, i)?;
    let (b, n) = (part.block_size(), part.dim());
    let off = part.offset(i);
    let rows = a.row_range(off, b);
    Ok(DenseMatrix::hstack(&[rows.col_range(0, off), rows.col_range(off + b, n - off - b)]))
}

/// Column block `i` of `a` with its diagonal block removed.
pub fn hss_block_column(a: &DenseMatrix, part: &BlockPartition, i: usize) -> Result<DenseMatrix> {
    check_square(a, part, i)?;
    let (b, n) = (part.block_size(), part.dim());
    let off = part.offset(i);
    let cols = a.col_range(off, b);
    Ok(DenseMatrix::vstack(&[cols.row_range(0, off), cols.row_range(off + b, n - off - b)]))
}

/// Block-diagonal matrix with equally shaped blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<DenseMatrix>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<DenseMatrix>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            if let Some(bad) = blocks.iter().position(|b| b.shape() != first.shape()) {
                return Err(Error::DimensionMismatch(format!(
                    "block {bad} is {:?}, expected {:?}",
                    blocks[bad].shape(),
                    first.shape()
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &DenseMatrix {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    /// Shape of each block.
    pub fn block_shape(&self) -> (usize, usize) {
        self.blocks.first().map_or((0, 0), DenseMatrix::shape)
    }

    pub fn shape(&self) -> (usize, usize) {
        let (r, c) = self.block_shape();
        (r * self.blocks.len(), c * self.blocks.len())
    }

    /// `self * x`.
    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let (r, c) = self.block_shape();
        assert_eq!(x.rows(), c * self.blocks.len(), "block-diagonal apply: row mismatch");
        let parts: Vec<DenseMatrix> =
            self.blocks.iter().enumerate().map(|(i, b)| b.matmul(&x.row_range(i * c, c))).collect();
        let out = DenseMatrix::vstack(&parts);
        debug_assert_eq!(out.rows(), r * self.blocks.len());
        out
    }

    /// `selfᵀ * x`.
    pub fn apply_transpose(&self, x: &DenseMatrix) -> DenseMatrix {
        let (r, _) = self.block_shape();
        assert_eq!(x.rows(), r * self.blocks.len(), "block-diagonal apply_transpose: row mismatch");
        let parts: Vec<DenseMatrix> =
            self.blocks.iter().enumerate().map(|(i, b)| b.t_matmul(&x.row_range(i * r, r))).collect();
        DenseMatrix::vstack(&parts)
    }

    pub fn transpose(&self) -> Self {
        Self { blocks: self.blocks.iter().map(DenseMatrix::transpose).collect() }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let (r, c) = self.block_shape();
        let (rows, cols) = self.shape();
        let mut out = DenseMatrix::zeros(rows, cols);
        for (i, b) in self.blocks.iter().enumerate() {
            out.set_submatrix(i * r, i * c, b);
        }
        out
    }

    /// Largest `‖BᵢᵀBᵢ − I‖_max` over blocks.
    pub fn orthonormality_defect(&self) -> f64 {
        self.blocks.iter().map(crate::kernels::orthonormality_defect).fold(0.0, f64::max)
    }

    /// Adds the blocks onto the diagonal of `a` scaled by `alpha`.
    pub(crate) fn add_to_diagonal(&self, a: &mut DenseMatrix, alpha: f64) {
        let (r, c) = self.block_shape();
        for (i, b) in self.blocks.iter().enumerate() {
            for p in 0..r {
                for q in 0..c {
                    a[(i * r + p, i * c + q)] += alpha * b[(p, q)];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RngStream;

    #[test]
    fn block_row_and_column_drop_the_diagonal_block() {
        let a = DenseMatrix::from_fn(8, 8, |i, j| (10 * i + j) as f64);
        let part = BlockPartition::hss_level(1, 2);
        let r1 = hss_block_row(&a, &part, 1).unwrap();
        assert_eq!(r1.shape(), (4, 4));
        assert_eq!(r1, a.submatrix(4, 0, 4, 4));
        let c0 = hss_block_column(&a, &part, 0).unwrap();
        assert_eq!(c0, a.submatrix(4, 0, 4, 4));
        let mid = BlockPartition::uniform(8, 4).unwrap();
        let r = hss_block_row(&a, &mid, 1).unwrap();
        assert_eq!(r.row(0), &[20., 21., 24., 25., 26., 27.]);
        assert!(hss_block_row(&a, &mid, 4).is_err());
    }

    #[test]
    fn block_diagonal_apply_matches_dense() {
        let s = RngStream::new(1);
        let blocks: Vec<DenseMatrix> = (0..3).map(|i| s.label(i).gaussian(4, 2)).collect();
        let u = BlockDiagonal::new(blocks).unwrap();
        let x = s.label(10).gaussian(6, 3);
        let y = s.label(11).gaussian(12, 3);
        assert!(u.apply(&x).sub(&u.to_dense().matmul(&x)).max_abs() < 1e-13);
        assert!(u.apply_transpose(&y).sub(&u.to_dense().t_matmul(&y)).max_abs() < 1e-13);
    }

    #[test]
    fn block_diagonal_rejects_ragged_blocks() {
        let r = BlockDiagonal::new(vec![DenseMatrix::zeros(2, 2), DenseMatrix::zeros(2, 3)]);
        assert!(r.is_err());
    }
}
