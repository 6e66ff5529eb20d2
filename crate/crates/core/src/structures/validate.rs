use super::block::{hss_block_column, hss_block_row, BlockPartition};
use crate::error::{Error, Result};
use crate::kernels::singular_values;
use crate::matrix::DenseMatrix;

/// Largest `σ_{k+1}(block) / σ_max(a)` over every HSS block row and block
/// column of every level `1..=levels`, where level `ℓ` splits `a` into
/// `2^ℓ` equal blocks. Zero for the zero matrix.
pub fn max_block_tail_ratio(a: &DenseMatrix, levels: usize, k: usize) -> Result<f64> {
    let n = (1usize << (levels + 1)) * k;
    if a.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "{:?} matrix, expected {n}x{n} for {levels} levels of rank {k}",
            a.shape()
        )));
    }
    a.ensure_finite()?;
    let smax = singular_values(a)?.first().copied().unwrap_or(0.0);
    let mut worst = 0.0f64;
    for level in 1..=levels {
        let part = BlockPartition::uniform(n, 1 << level)?;
        for i in 0..part.block_count() {
            for block in [hss_block_row(a, &part, i)?, hss_block_column(a, &part, i)?] {
                let tail = singular_values(&block)?.get(k).copied().unwrap_or(0.0);
                if tail > 0.0 {
                    worst = worst.max(if smax > 0.0 { tail / smax } else { f64::INFINITY });
                }
            }
        }
    }
    Ok(worst)
}

/// Whether every HSS block row and column of every level has
/// `σ_{k+1} ≤ tol · σ_max(a)`.
pub fn validate_hss_ranks(a: &DenseMatrix, levels: usize, k: usize, tol: f64) -> Result<bool> {
    Ok(max_block_tail_ratio(a, levels, k)? <= tol)
}
