//! Dense linear-algebra kernels and the splittable Gaussian stream.
//!
//! SVDs go through faer. QR is a local Householder implementation
//! because the basis-selection step needs classical column-norm pivoting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};

/// Relative threshold below which singular values count as zero.
pub const NULLSPACE_TOL: f64 = 1e-12;
/// Relative threshold on `|R_jj|` below which a QR factor is rank deficient.
pub const PIVOT_TOL: f64 = 1e-12;
/// Relative gap under which two singular values are treated as tied.
const TIE_TOL: f64 = 1e-14;

/// Which of the four sketch matrices a draw belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Omega,
    OmegaTilde,
    Psi,
    PsiTilde,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Omega => 0,
            Role::OmegaTilde => 1,
            Role::Psi => 2,
            Role::PsiTilde => 3,
        }
    }
}

/// Deterministic Gaussian source addressed by a label path.
///
/// Two streams with the same seed and path produce identical draws; any
/// difference in the path yields an independent ChaCha key. Sketches are
/// drawn per block so results do not depend on evaluation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn child(&self, kind: u64, value: u64) -> Self {
        let mut path = self.path.clone();
        path.push((kind << 56) ^ value);
        Self { seed: self.seed, path }
    }

    pub fn level(&self, level: usize) -> Self {
        self.child(1, level as u64)
    }

    pub fn block(&self, block: usize) -> Self {
        self.child(2, block as u64)
    }

    pub fn role(&self, role: Role) -> Self {
        self.child(3, role.tag())
    }

    /// Free-form label for streams outside the sketch hierarchy.
    pub fn label(&self, value: u64) -> Self {
        self.child(4, value)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = splitmix64(self.seed ^ 0x5851_f42d_4c95_7f2d);
        for (depth, &p) in self.path.iter().enumerate() {
            h = splitmix64(h ^ splitmix64(p.wrapping_add((depth as u64 + 1) << 48)));
        }
        let mut key = [0u8; 32];
        for (w, chunk) in key.chunks_mut(8).enumerate() {
            h = splitmix64(h.wrapping_add(w as u64));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// `rows x cols` standard Gaussian matrix, filled row by row.
    pub fn gaussian(&self, rows: usize, cols: usize) -> DenseMatrix {
        let mut rng = self.rng();
        let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        DenseMatrix::new(rows, cols, data).expect("length matches by construction")
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Householder QR, optionally with column-norm pivoting.
#[derive(Clone, Debug)]
pub struct Qr {
    /// `m x r` with orthonormal columns, `r = min(m, n)`.
    pub q: DenseMatrix,
    /// `r x n` upper triangular (in pivoted column order).
    pub r: DenseMatrix,
    /// Column `j` of `r` corresponds to column `perm[j]` of the input.
    pub perm: Vec<usize>,
}

pub fn householder_qr(a: &DenseMatrix, pivot: bool) -> Qr {
    let (m, n) = a.shape();
    let r_dim = m.min(n);
    // Column-major working copy.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(r_dim);

    for j in 0..r_dim {
        if pivot {
            let mut best = j;
            let mut best_norm = -1.0;
            for (p, col) in cols.iter().enumerate().skip(j) {
                let norm: f64 = col[j..].iter().map(|x| x * x).sum();
                if norm > best_norm {
                    best_norm = norm;
                    best = p;
                }
            }
            cols.swap(j, best);
            perm.swap(j, best);
        }
        let x = &cols[j][j..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = x.to_vec();
        if norm > 0.0 {
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vn = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if vn > 0.0 {
                v.iter_mut().for_each(|t| *t /= vn);
            }
        } else {
            v.iter_mut().for_each(|t| *t = 0.0);
        }
        for col in cols.iter_mut().skip(j) {
            let tail = &mut col[j..];
            let proj = 2.0 * dot(&v, tail);
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= proj * vi;
            }
        }
        reflectors.push(v);
    }

    let r = DenseMatrix::from_fn(r_dim, n, |i, j| if i <= j { cols[j][i] } else { 0.0 });
    let mut q = DenseMatrix::zeros(m, r_dim);
    for c in 0..r_dim {
        let mut e = vec![0.0; m];
        e[c] = 1.0;
        for (j, v) in reflectors.iter().enumerate().rev() {
            let tail = &mut e[j..];
            let proj = 2.0 * dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= proj * vi;
            }
        }
        for i in 0..m {
            q[(i, c)] = e[i];
        }
    }
    Qr { q, r, perm }
}

/// Thin orthonormal basis for the columns of a full-column-rank `a`.
pub fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    householder_qr(a, false).q.col_range(0, a.cols().min(a.rows()))
}

/// Singular triplets sorted by decreasing singular value, with each vector
/// sign-normalized so its largest-magnitude entry is positive.
struct SortedSvd {
    sigma: Vec<f64>,
    u: DenseMatrix,
    v: Option<DenseMatrix>,
}

fn sorted_svd(a: &DenseMatrix, want_v: bool) -> Result<SortedSvd> {
    a.ensure_finite()?;
    let (m, n) = a.shape();
    let p = m.min(n);
    if p == 0 {
        return Ok(SortedSvd {
            sigma: Vec::new(),
            u: DenseMatrix::zeros(m, 0),
            v: want_v.then(|| DenseMatrix::zeros(n, 0)),
        });
    }
    let mat = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = mat.thin_svd().map_err(|_| Error::InvalidParameter("SVD failed to converge".into()))?;
    let (su, sv, sd) = (svd.U(), svd.V(), svd.S().column_vector());
    let sigma_raw: Vec<f64> = (0..p).map(|c| sd[c]).collect();

    let mut u_cols: Vec<Vec<f64>> = (0..p).map(|c| (0..m).map(|i| su[(i, c)]).collect()).collect();
    let mut v_cols: Option<Vec<Vec<f64>>> =
        want_v.then(|| (0..p).map(|c| (0..n).map(|i| sv[(i, c)]).collect()).collect());

    for c in 0..p {
        let s = sign_of_dominant(&u_cols[c]);
        if s < 0.0 {
            u_cols[c].iter_mut().for_each(|x| *x = -*x);
            if let Some(v) = v_cols.as_mut() {
                v[c].iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    let smax = sigma_raw.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| sigma_raw[b].partial_cmp(&sigma_raw[a]).expect("finite singular values"));
    // Within runs of (numerically) equal singular values, order vectors
    // lexicographically, largest first, so ties resolve deterministically.
    let mut start = 0;
    while start < p {
        let mut end = start + 1;
        while end < p && sigma_raw[order[end - 1]] - sigma_raw[order[end]] <= TIE_TOL * smax {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| lexicographic(&u_cols[b], &u_cols[a]));
        start = end;
    }

    // Values stay strictly sorted; only vectors move within a tie run.
    let mut sigma = sigma_raw.clone();
    sigma.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    let u = DenseMatrix::from_fn(m, p, |i, j| u_cols[order[j]][i]);
    let v = v_cols.map(|vc| DenseMatrix::from_fn(n, p, |i, j| vc[order[j]][i]));
    Ok(SortedSvd { sigma, u, v })
}

fn sign_of_dominant(x: &[f64]) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &v in x {
        if v.abs() > best {
            best = v.abs();
            sign = v.signum();
        }
    }
    sign
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(sorted_svd(a, false)?.sigma)
}

/// `Σ_{j>k} σ_j²`, the squared error of the best rank-`k` approximation.
pub fn best_rank_residual_sq(a: &DenseMatrix, k: usize) -> Result<f64> {
    Ok(singular_values(a)?.iter().skip(k).map(|s| s * s).sum())
}

/// Leading `k` left singular vectors of `b`.
pub fn truncated_svd_left(b: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if k > b.rows().min(b.cols()) {
        return Err(Error::InvalidParameter(format!(
            "rank {k} exceeds min dimension of {}x{} matrix",
            b.rows(),
            b.cols()
        )));
    }
    let svd = sorted_svd(b, false)?;
    Ok(svd.u.col_range(0, k))
}

/// Orthonormal basis of the nullspace of a wide, full-row-rank `omega`.
///
/// The result has exactly `cols - rows` columns; anything else means the
/// input was rank deficient and is reported as an error.
pub fn nullspace_basis(omega: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, s) = omega.shape();
    if m > s {
        return Err(Error::InvalidParameter(format!("nullspace of tall {m}x{s} matrix")));
    }
    // Pad to square so the thin SVD yields the full right factor.
    let mut padded = DenseMatrix::zeros(s, s);
    padded.set_submatrix(0, 0, omega);
    let svd = sorted_svd(&padded, true)?;
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> =
        (0..s).filter(|&j| svd.sigma[j] <= NULLSPACE_TOL * smax || smax == 0.0).collect();
    if keep.len() != s - m {
        return Err(Error::NullspaceDimension { expected: s - m, found: keep.len() });
    }
    Ok(svd.v.expect("requested").select_columns(&keep))
}

/// First `k` columns of `Q` from column-pivoted QR of `y`.
pub fn pivoted_qr_basis(y: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    y.ensure_finite()?;
    if k > y.rows().min(y.cols()) {
        return Err(Error::InvalidParameter(format!(
            "rank {k} exceeds min dimension of {}x{} matrix",
            y.rows(),
            y.cols()
        )));
    }
    Ok(householder_qr(y, true).q.col_range(0, k))
}

/// `y * omega⁺` for a wide, full-row-rank `omega`, via QR of `omegaᵀ`.
pub fn right_pinv_apply(y: &DenseMatrix, omega: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, s) = omega.shape();
    if y.cols() != s {
        return Err(Error::DimensionMismatch(format!(
            "right_pinv_apply: {}x{} times pinv of {m}x{s}",
            y.rows(),
            y.cols()
        )));
    }
    if m > s {
        return Err(Error::InvalidParameter(format!("pseudo-inverse of tall {m}x{s} sketch")));
    }
    y.ensure_finite()?;
    omega.ensure_finite()?;
    let qr = householder_qr(&omega.transpose(), false);
    let rmax = (0..m).fold(0.0f64, |a, i| a.max(qr.r[(i, i)].abs()));
    for i in 0..m {
        if qr.r[(i, i)].abs() <= PIVOT_TOL * rmax || rmax == 0.0 {
            return Err(Error::RankDeficient(format!("sketch pivot {i} below tolerance")));
        }
    }
    // y Ω⁺ = (y Q) R⁻ᵀ; solve row by row with back substitution on R.
    let w = y.matmul(&qr.q);
    let mut x = DenseMatrix::zeros(y.rows(), m);
    for row in 0..y.rows() {
        for i in (0..m).rev() {
            let mut acc = w[(row, i)];
            for j in i + 1..m {
                acc -= qr.r[(i, j)] * x[(row, j)];
            }
            x[(row, i)] = acc / qr.r[(i, i)];
        }
    }
    Ok(x)
}

/// `‖qᵀq − I‖_max`.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    q.t_matmul(q).sub(&DenseMatrix::identity(q.cols())).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_paths_are_reproducible_and_distinct() {
        let base = RngStream::new(7);
        let a = base.level(3).block(1).role(Role::Omega).gaussian(4, 5);
        let b = base.level(3).block(1).role(Role::Omega).gaussian(4, 5);
        let c = base.level(3).block(2).role(Role::Omega).gaussian(4, 5);
        let d = base.level(3).block(1).role(Role::Psi).gaussian(4, 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, RngStream::new(8).level(3).block(1).role(Role::Omega).gaussian(4, 5));
    }

    #[test]
    fn sibling_streams_are_uncorrelated() {
        let n = 20_000;
        let x = RngStream::new(1).block(0).gaussian(1, n);
        let y = RngStream::new(1).block(1).gaussian(1, n);
        let mean_x = x.as_slice().iter().sum::<f64>() / n as f64;
        let var_x = x.as_slice().iter().map(|v| v * v).sum::<f64>() / n as f64;
        let corr = dot(x.as_slice(), y.as_slice()) / n as f64;
        // Standard error of each statistic is about 1/sqrt(n) = 0.007.
        assert!(mean_x.abs() < 0.04, "mean {mean_x}");
        assert!((var_x - 1.0).abs() < 0.06, "variance {var_x}");
        assert!(corr.abs() < 0.04, "correlation {corr}");
    }

    #[test]
    fn qr_reconstructs_input() {
        let a = RngStream::new(3).gaussian(7, 5);
        for pivot in [false, true] {
            let qr = householder_qr(&a, pivot);
            assert!(orthonormality_defect(&qr.q) < 1e-13);
            let ap = a.select_columns(&qr.perm);
            assert!(qr.q.matmul(&qr.r).sub(&ap).max_abs() < 1e-12);
            for i in 0..qr.r.rows() {
                for j in 0..i {
                    assert_eq!(qr.r[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn pivoting_orders_diagonal_of_r() {
        let a = DenseMatrix::from_fn(6, 6, |i, j| if i == j { (j + 1) as f64 } else { 0.0 });
        let qr = householder_qr(&a, true);
        assert_eq!(qr.perm, vec![5, 4, 3, 2, 1, 0]);
        let diag: Vec<f64> = (0..6).map(|i| qr.r[(i, i)].abs()).collect();
        assert!(diag.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn truncated_svd_recovers_planted_subspace() {
        let stream = RngStream::new(11);
        let u0 = orthonormalize(&stream.label(0).gaussian(8, 3));
        let b = u0.matmul(&stream.label(1).gaussian(3, 20));
        let u = truncated_svd_left(&b, 3).unwrap();
        assert!(orthonormality_defect(&u) < 1e-13);
        let proj = u.matmul(&u.t_matmul(&b));
        assert!(proj.sub(&b).max_abs() < 1e-12);
        for j in 0..3 {
            let col = u.column(j);
            let dom = col.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
            assert!(dom > 0.0);
        }
        assert!(truncated_svd_left(&b, 9).is_err());
    }

    #[test]
    fn singular_values_of_diagonal_are_sorted_absolute_entries() {
        let a = DenseMatrix::from_fn(3, 4, |i, j| if i == j { [1.0, -5.0, 2.0][i] } else { 0.0 });
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 5.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14 && (s[2] - 1.0).abs() < 1e-14);
        assert!((best_rank_residual_sq(&a, 1).unwrap() - 5.0).abs() < 1e-13);
    }

    #[test]
    fn nullspace_of_gaussian_sketch() {
        let omega = RngStream::new(5).gaussian(6, 11);
        let p = nullspace_basis(&omega).unwrap();
        assert_eq!(p.shape(), (11, 5));
        assert!(orthonormality_defect(&p) < 1e-12);
        assert!(omega.matmul(&p).max_abs() < 1e-12);
    }

    #[test]
    fn nullspace_rejects_rank_deficient_rows() {
        let mut omega = RngStream::new(5).gaussian(4, 9);
        let r0 = omega.row(0).to_vec();
        omega.row_mut(1).copy_from_slice(&r0);
        assert!(matches!(
            nullspace_basis(&omega),
            Err(Error::NullspaceDimension { expected: 5, found: 6 })
        ));
    }

    #[test]
    fn right_pinv_matches_normal_equations() {
        let s = RngStream::new(9);
        let omega = s.label(0).gaussian(4, 10);
        let y = s.label(1).gaussian(3, 10);
        let x = right_pinv_apply(&y, &omega).unwrap();
        // Oracle: y Ωᵀ (Ω Ωᵀ)⁻¹ through nalgebra's LU.
        let g = omega.matmul_t(&omega).to_nalgebra().try_inverse().unwrap();
        let expect = y.matmul_t(&omega).matmul(&DenseMatrix::from_nalgebra(&g));
        assert!(x.sub(&expect).max_abs() < 1e-12);
        // Exact consistency: (W Ω) Ω⁺ = W.
        let w = s.label(2).gaussian(3, 4);
        assert!(right_pinv_apply(&w.matmul(&omega), &omega).unwrap().sub(&w).max_abs() < 1e-12);
    }

    #[test]
    fn right_pinv_rejects_rank_deficient_sketch() {
        let mut omega = RngStream::new(2).gaussian(3, 8);
        let r0 = omega.row(0).to_vec();
        omega.row_mut(2).copy_from_slice(&r0);
        let y = RngStream::new(3).gaussian(2, 8);
        assert!(matches!(right_pinv_apply(&y, &omega), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn kernels_reject_non_finite_input() {
        let mut b = DenseMatrix::identity(3);
        b[(1, 2)] = f64::NAN;
        assert!(matches!(truncated_svd_left(&b, 1), Err(Error::NonFinite)));
        assert!(matches!(pivoted_qr_basis(&b, 1), Err(Error::NonFinite)));
    }
}
