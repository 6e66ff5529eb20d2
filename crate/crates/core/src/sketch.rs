//! Gaussian sketches and the per-block building blocks of the matvec
//! algorithms: block nullification, basis extraction, diagonal recovery.

use crate::error::{Error, Result};
use crate::kernels::{nullspace_basis, pivoted_qr_basis, right_pinv_apply, truncated_svd_left, Role, RngStream};
use crate::matrix::DenseMatrix;
use crate::oracle::{level_apply, level_apply_transpose, MatvecOracle, PartialFactorization};
use crate::structures::BlockPartition;

/// How a `k`-dimensional basis is extracted from a nullified sketch `Yᵢ Pᵢ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisMethod {
    /// Leading left singular vectors (needs `Pᵢ` to have `≥ k + 2` columns).
    SvdPcps,
    /// First `k` columns of `Q` from column-pivoted QR.
    PivotedQr,
}

/// Test matrices and their images for one level.
///
/// `y = A Ω`, `y_tilde = A Ω̃`, `z = Aᵀ Ψ`, `z_tilde = Aᵀ Ψ̃`; every matrix
/// is `n x s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchBundle {
    pub omega: DenseMatrix,
    pub omega_tilde: DenseMatrix,
    pub psi: DenseMatrix,
    pub psi_tilde: DenseMatrix,
    pub y: DenseMatrix,
    pub y_tilde: DenseMatrix,
    pub z: DenseMatrix,
    pub z_tilde: DenseMatrix,
}

/// The four Gaussian test matrices, drawn block by block from
/// `stream.block(i).role(r)`.
pub fn sample_test_matrices(
    stream: &RngStream,
    part: &BlockPartition,
    s: usize,
) -> [DenseMatrix; 4] {
    [Role::Omega, Role::OmegaTilde, Role::Psi, Role::PsiTilde].map(|role| {
        let blocks: Vec<DenseMatrix> = (0..part.block_count())
            .map(|i| stream.block(i).role(role).gaussian(part.block_size(), s))
            .collect();
        DenseMatrix::vstack(&blocks)
    })
}

impl SketchBundle {
    /// Samples fresh test matrices for level `partial.next_level()` and
    /// applies `A^(ℓ+1)` and its transpose: `4s` queries in total.
    pub fn acquire(
        partial: &PartialFactorization,
        oracle: &impl MatvecOracle,
        stream: &RngStream,
        s: usize,
    ) -> Result<Self> {
        let level = partial.next_level();
        let part = BlockPartition::hss_level(level, partial.rank());
        let [omega, omega_tilde, psi, psi_tilde] = sample_test_matrices(stream, &part, s);
        let fwd = level_apply(partial, oracle, &DenseMatrix::hstack(&[omega.clone(), omega_tilde.clone()]))?;
        let tr = level_apply_transpose(partial, oracle, &DenseMatrix::hstack(&[psi.clone(), psi_tilde.clone()]))?;
        Ok(Self {
            y: fwd.col_range(0, s),
            y_tilde: fwd.col_range(s, s),
            z: tr.col_range(0, s),
            z_tilde: tr.col_range(s, s),
            omega,
            omega_tilde,
            psi,
            psi_tilde,
        })
    }

    pub fn sketch_width(&self) -> usize {
        self.omega.cols()
    }
}

/// Rows of block `i` of `m`.
pub fn row_block(m: &DenseMatrix, part: &BlockPartition, i: usize) -> DenseMatrix {
    m.row_range(part.offset(i), part.block_size())
}

/// Orthonormal basis `Pᵢ` of the nullspace of block `i` of `omega`, so
/// that `Yᵢ Pᵢ` sees only the off-diagonal part of block row `i`.
pub fn block_nullify(omega: &DenseMatrix, part: &BlockPartition, i: usize) -> Result<DenseMatrix> {
    if omega.rows() != part.dim() || i >= part.block_count() {
        return Err(Error::DimensionMismatch(format!(
            "block {i} of a {}-row sketch under a partition of dimension {}",
            omega.rows(),
            part.dim()
        )));
    }
    nullspace_basis(&row_block(omega, part, i))
}

/// Leading `k` left singular vectors of `y_block * p`.
pub fn pcps_basis(y_block: &DenseMatrix, p: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if p.cols() < k + 2 {
        return Err(Error::InvalidParameter(format!(
            "projected sketch has {} columns, need at least k + 2 = {}",
            p.cols(),
            k + 2
        )));
    }
    truncated_svd_left(&y_block.matmul(p), k)
}

/// Basis of `y_block * p` by the selected method.
pub fn extract_basis(method: BasisMethod, y_block: &DenseMatrix, p: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    match method {
        BasisMethod::SvdPcps => pcps_basis(y_block, p, k),
        BasisMethod::PivotedQr => pivoted_qr_basis(&y_block.matmul(p), k),
    }
}

fn complement_projector_apply(q: &DenseMatrix, m: &DenseMatrix) -> DenseMatrix {
    m.sub(&q.matmul(&q.t_matmul(m)))
}

/// Diagonal block estimate
/// `(I − UUᵀ) Ỹ Ω̃⁺ + UUᵀ [(I − VVᵀ) Z̃ Ψ̃⁺]ᵀ`.
///
/// `y_tilde` / `omega_tilde` hold the rows of the block under estimation
/// and `z_tilde` / `psi_tilde` the matching transpose-side rows; the
/// pseudo-inverse products may span several blocks (see
/// [`crate::blr2`]), in which case the caller slices them first.
pub fn recover_diagonal(
    u: &DenseMatrix,
    v: &DenseMatrix,
    y_tilde: &DenseMatrix,
    omega_tilde: &DenseMatrix,
    z_tilde: &DenseMatrix,
    psi_tilde: &DenseMatrix,
) -> Result<DenseMatrix> {
    let row_est = right_pinv_apply(y_tilde, omega_tilde)?;
    let col_est = right_pinv_apply(z_tilde, psi_tilde)?;
    combine_diagonal_estimates(u, v, &row_est, &col_est)
}

/// `(I − UUᵀ) R + UUᵀ [(I − VVᵀ) C]ᵀ` for raw estimates `R ≈ Dᵢ` (from the
/// forward sketch) and `C ≈ Dᵢᵀ` (from the transpose sketch).
pub fn combine_diagonal_estimates(
    u: &DenseMatrix,
    v: &DenseMatrix,
    row_est: &DenseMatrix,
    col_est: &DenseMatrix,
) -> Result<DenseMatrix> {
    if row_est.shape() != (u.rows(), v.rows()) || col_est.shape() != (v.rows(), u.rows()) {
        return Err(Error::DimensionMismatch(format!(
            "diagonal estimates {:?} and {:?} for bases {:?}, {:?}",
            row_est.shape(),
            col_est.shape(),
            u.shape(),
            v.shape()
        )));
    }
    let left = complement_projector_apply(u, row_est);
    let right = complement_projector_apply(v, col_est).transpose();
    let right = u.matmul(&u.t_matmul(&right));
    Ok(left.add(&right))
}
