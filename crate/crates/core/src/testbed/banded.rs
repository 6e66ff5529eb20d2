use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::RngStream;
use crate::matrix::DenseMatrix;
use crate::oracle::{check_input, MatvecOracle};

/// Symmetric matrix with half-bandwidth `h`, stored as its lower band:
/// `band[i * (h + 1) + d] = M[i][i − d]`.
#[derive(Clone, Debug)]
pub struct SymmetricBand {
    n: usize,
    h: usize,
    band: Vec<f64>,
}

impl SymmetricBand {
    pub fn zeros(n: usize, h: usize) -> Self {
        Self { n, h, band: vec![0.0; n * (h + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.h
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.h { 0.0 } else { self.band[i * (self.h + 1) + (i - j)] }
    }

    /// Sets `M[i][j] = M[j][i] = value`.
    ///
    /// # Panics
    /// If `|i − j|` exceeds the half-bandwidth.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.h, "entry ({i}, {j}) outside the band");
        self.band[i * (self.h + 1) + (i - j)] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + value);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.h);
                let hi = (i + self.h).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Cholesky factor `M = L Lᵀ` of a symmetric positive definite band
/// matrix; `L` keeps the half-bandwidth of `M`.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    factor: SymmetricBand,
}

impl BandedCholesky {
    pub fn new(m: &SymmetricBand) -> Result<Self> {
        let (n, h) = (m.n, m.h);
        let w = h + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(h);
            for j in lo..=i {
                let mut sum = m.get(i, j);
                for p in lo.max(j.saturating_sub(h))..j {
                    sum -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::RankDeficient(format!(
                            "band matrix is not positive definite at row {i}"
                        )));
                    }
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(Self { factor: SymmetricBand { n, h, band: l } })
    }

    pub fn dim(&self) -> usize {
        self.factor.n
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.factor.band[i * (self.factor.h + 1) + (i - j)]
    }

    /// Overwrites `b` with `M⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, h) = (self.factor.n, self.factor.h);
        assert_eq!(b.len(), n, "band solve: length mismatch");
        for i in 0..n {
            let mut acc = b[i];
            for j in i.saturating_sub(h)..i {
                acc -= self.l(i, j) * b[j];
            }
            b[i] = acc / self.l(i, i);
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..(i + h + 1).min(n) {
                acc -= self.l(j, i) * b[j];
            }
            b[i] = acc / self.l(i, i);
        }
    }

    /// `M⁻¹ x`, column by column.
    pub fn solve(&self, x: &DenseMatrix) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..x.cols())
            .into_par_iter()
            .map(|c| {
                let mut v = x.column(c);
                self.solve_in_place(&mut v);
                v
            })
            .collect();
        DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| cols[j][i])
    }
}

/// `A = M⁻¹` for a symmetric, strictly diagonally dominant band matrix `M`.
/// Off-diagonal blocks of `A` have rank at most the half-bandwidth of `M`.
#[derive(Clone, Debug)]
pub struct BandedInverseOracle {
    matrix: SymmetricBand,
    chol: BandedCholesky,
}

impl BandedInverseOracle {
    pub fn new(matrix: SymmetricBand) -> Result<Self> {
        let chol = BandedCholesky::new(&matrix)?;
        Ok(Self { matrix, chol })
    }

    pub fn band_matrix(&self) -> &SymmetricBand {
        &self.matrix
    }
}

impl MatvecOracle for BandedInverseOracle {
    fn dim(&self) -> usize {
        self.matrix.n
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self.dim(), x)?;
        Ok(self.chol.solve(x))
    }

    fn apply_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply(x)
    }
}

/// Inverse of an `n x n` random symmetric band matrix with `bandwidth`
/// nonzero diagonals (odd, so half-bandwidth `h = (bandwidth − 1) / 2`).
///
/// Off-band entries are uniform on `[−1, 1]`; each diagonal entry is one
/// more than the absolute off-diagonal sum of its row. The inverse is HSS
/// with rank `2h` at every level.
pub fn banded_inverse_oracle(n: usize, bandwidth: usize, seed: u64) -> Result<BandedInverseOracle> {
    if bandwidth.is_multiple_of(2) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be odd and positive, got {bandwidth} (n = {n})"
        )));
    }
    let h = (bandwidth - 1) / 2;
    let mut m = SymmetricBand::zeros(n, h);
    let mut rng = RngStream::new(seed).label(0xBA4D).rng();
    for i in 0..n {
        for j in i.saturating_sub(h)..i {
            m.set(i, j, rng.random_range(-1.0..=1.0));
        }
    }
    for i in 0..n {
        let lo = i.saturating_sub(h);
        let hi = (i + h).min(n - 1);
        let off: f64 = (lo..=hi).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
        m.set(i, i, off + 1.0);
    }
    BandedInverseOracle::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dense_from_oracle;
    use crate::structures::validate_hss_ranks;

    #[test]
    fn band_cholesky_matches_dense_inverse() {
        let o = banded_inverse_oracle(40, 7, 3).unwrap();
        let m = o.band_matrix().to_dense();
        let inv = DenseMatrix::from_nalgebra(&m.to_nalgebra().try_inverse().unwrap());
        let a = dense_from_oracle(&o).unwrap();
        assert!(a.sub(&inv).max_abs() < 1e-12);
        assert!(a.sub(&a.transpose()).max_abs() < 1e-13);
    }

    #[test]
    fn band_structure_is_respected() {
        let o = banded_inverse_oracle(20, 5, 1).unwrap();
        let m = o.band_matrix();
        assert_eq!(m.half_bandwidth(), 2);
        assert_eq!(m.get(0, 3), 0.0);
        assert_ne!(m.get(0, 2), 0.0);
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let dense = m.to_dense().matmul(&DenseMatrix::new(20, 1, x.clone()).unwrap());
        let band = m.matvec(&x);
        assert!(dense.as_slice().iter().zip(&band).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn inverse_has_hss_rank_twice_half_bandwidth() {
        let o = banded_inverse_oracle(256, 9, 7).unwrap();
        let a = dense_from_oracle(&o).unwrap();
        assert!(validate_hss_ranks(&a, 4, 8, 1e-8).unwrap());
        assert!(!validate_hss_ranks(&a, 5, 4, 1e-8).unwrap());
    }

    #[test]
    fn rejects_indefinite_band() {
        let mut m = SymmetricBand::zeros(3, 1);
        m.set(0, 0, 1.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 1.0);
        m.set(2, 2, 1.0);
        assert!(BandedCholesky::new(&m).is_err());
        assert!(banded_inverse_oracle(10, 4, 0).is_err());
    }
}
