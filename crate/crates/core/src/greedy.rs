//! Greedy HSS approximation from explicit entries.
//!
//! Each level keeps the dominant `k`-dimensional row and column spaces of
//! every block row and block column, stores the diagonal blocks exactly,
//! and recurses on the compressed coupling matrix.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::truncated_svd_left;
use crate::matrix::DenseMatrix;
use crate::structures::{
    hss_block_column, hss_block_row, BlockDiagonal, BlockPartition, LevelFactors, SssFactorization,
    TelescopingFactorization,
};

fn check_dims(a: &DenseMatrix, level: usize, k: usize) -> Result<BlockPartition> {
    if k == 0 || level == 0 {
        return Err(Error::InvalidParameter(format!("level {level}, rank {k}: both must be positive")));
    }
    let part = BlockPartition::hss_level(level, k);
    if a.shape() != (part.dim(), part.dim()) {
        let n = part.dim();
        return Err(Error::DimensionMismatch(format!(
            "{:?} matrix, level {level} with rank {k} needs {n}x{n}",
            a.shape()
        )));
    }
    a.ensure_finite()?;
    Ok(part)
}

/// One level: returns `U`, `V`, `D` and the compressed `X = Uᵀ(A − D)V`.
pub fn sss_step_explicit(a: &DenseMatrix, level: usize, k: usize) -> Result<SssFactorization> {
    let part = check_dims(a, level, k)?;
    let triples: Vec<(DenseMatrix, DenseMatrix, DenseMatrix)> = (0..part.block_count())
        .into_par_iter()
        .map(|i| {
            let u = truncated_svd_left(&hss_block_row(a, &part, i)?, k)?;
            let v = truncated_svd_left(&hss_block_column(a, &part, i)?.transpose(), k)?;
            let off = part.offset(i);
            let d = a.submatrix(off, off, part.block_size(), part.block_size());
            Ok((u, v, d))
        })
        .collect::<Result<_>>()?;
    let mut us = Vec::with_capacity(triples.len());
    let mut vs = Vec::with_capacity(triples.len());
    let mut ds = Vec::with_capacity(triples.len());
    for (u, v, d) in triples {
        us.push(u);
        vs.push(v);
        ds.push(d);
    }
    let factors = LevelFactors::new(BlockDiagonal::new(us)?, BlockDiagonal::new(vs)?, BlockDiagonal::new(ds)?)?;
    let x = factors.compress(a);
    SssFactorization::new(factors, x)
}

/// Full `levels`-level greedy factorization of an explicit `a`.
pub fn hss_explicit_greedy(a: &DenseMatrix, levels: usize, k: usize) -> Result<TelescopingFactorization> {
    check_dims(a, levels, k)?;
    let mut current = a.clone();
    let mut found = Vec::with_capacity(levels);
    for level in (1..=levels).rev() {
        let step = sss_step_explicit(&current, level, k)?;
        found.push(step.factors);
        current = step.x;
    }
    found.reverse();
    TelescopingFactorization::new(k, found, current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{best_rank_residual_sq, RngStream};
    use crate::testbed::random_hss;

    #[test]
    fn recovers_exact_hss_matrix() {
        let a = random_hss(3, 2, 31).reconstruct_dense();
        let t = hss_explicit_greedy(&a, 3, 2).unwrap();
        let err = t.reconstruct_dense().sub(&a).frobenius_norm() / a.frobenius_norm();
        assert!(err < 1e-12, "relative error {err}");
        assert!(t.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn step_error_splits_into_level_and_remainder() {
        // ‖A − B‖² = ‖A − UXVᵀ − D‖² + ‖X − B^(L)‖² since U, V are orthonormal.
        let a = RngStream::new(3).gaussian(32, 32);
        let t = hss_explicit_greedy(&a, 3, 2).unwrap();
        let step = sss_step_explicit(&a, 3, 2).unwrap();
        let total = t.reconstruct_dense().sub(&a).frobenius_norm_sq();
        let level = step.reconstruct().sub(&a).frobenius_norm_sq();
        let rest = step.x.sub(&t.prefix(2).reconstruct_dense()).frobenius_norm_sq();
        assert!((total - level - rest).abs() < 1e-9 * total);
    }

    #[test]
    fn single_level_error_within_block_residuals() {
        // The single-level error is bounded by the sum of best rank-k
        // residuals of block rows and block columns.
        let a = RngStream::new(8).gaussian(16, 16);
        let part = BlockPartition::hss_level(2, 2);
        let step = sss_step_explicit(&a, 2, 2).unwrap();
        let err = step.reconstruct().sub(&a).frobenius_norm_sq();
        let mut bound = 0.0;
        for i in 0..4 {
            bound += best_rank_residual_sq(&hss_block_row(&a, &part, i).unwrap(), 2).unwrap();
            bound += best_rank_residual_sq(&hss_block_column(&a, &part, i).unwrap(), 2).unwrap();
        }
        assert!(err <= bound + 1e-10);
    }

    #[test]
    fn rejects_non_conforming_input() {
        assert!(hss_explicit_greedy(&DenseMatrix::zeros(12, 12), 2, 2).is_err());
        let mut a = DenseMatrix::identity(16);
        a[(0, 3)] = f64::INFINITY;
        assert!(matches!(hss_explicit_greedy(&a, 2, 2), Err(Error::NonFinite)));
    }
}
