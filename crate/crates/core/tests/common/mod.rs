//! Test-only generators and metrics shared by the integration suites.
#![allow(dead_code)]

use hss_core::blr2::SparsityPattern;
use hss_core::kernels::{orthonormalize, RngStream};
use hss_core::DenseMatrix;

pub fn rel_err(approx: &DenseMatrix, exact: &DenseMatrix) -> f64 {
    approx.sub(exact).frobenius_norm() / exact.frobenius_norm()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "median of nothing");
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Dense block-diagonal matrix with `count` Gaussian `rows x cols` blocks.
pub fn block_diag_gaussian(stream: &RngStream, count: usize, rows: usize, cols: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(count * rows, count * cols);
    for i in 0..count {
        out.set_submatrix(i * rows, i * cols, &stream.block(i).gaussian(rows, cols));
    }
    out
}

pub fn random_orthonormal_blocks(count: usize, rows: usize, cols: usize, seed: u64) -> Vec<DenseMatrix> {
    let s = RngStream::new(seed);
    (0..count).map(|i| orthonormalize(&s.block(i).gaussian(rows, cols))).collect()
}

/// `m x n` matrix `Q₁ diag(sigma) Q₂ᵀ` with random orthonormal factors.
pub fn matrix_with_spectrum(m: usize, n: usize, sigma: &[f64], seed: u64) -> DenseMatrix {
    let r = sigma.len();
    let s = RngStream::new(seed);
    let q1 = orthonormalize(&s.label(0).gaussian(m, r));
    let q2 = orthonormalize(&s.label(1).gaussian(n, r));
    let scaled = DenseMatrix::from_fn(m, r, |i, j| q1[(i, j)] * sigma[j]);
    scaled.matmul_t(&q2)
}

/// `U X Vᵀ + D` with orthonormal `m x k` basis blocks and `D` supported on
/// the pattern; assembled entry by entry, independently of the library's
/// reconstruction.
pub fn planted_blr2(pattern: &SparsityPattern, m: usize, k: usize, seed: u64) -> DenseMatrix {
    let b = pattern.block_count();
    let s = RngStream::new(seed);
    let u = random_orthonormal_blocks(b, m, k, seed ^ 0x55);
    let v = random_orthonormal_blocks(b, m, k, seed ^ 0xaa);
    let x = s.label(2).gaussian(b * k, b * k);
    let mut a = DenseMatrix::zeros(b * m, b * m);
    for i in 0..b {
        for j in 0..b {
            let xij = x.submatrix(i * k, j * k, k, k);
            let mut blk = u[i].matmul(&xij).matmul_t(&v[j]);
            if pattern.contains(i, j) {
                blk.add_assign(&s.label(3).block(i * b + j).gaussian(m, m));
            }
            a.set_submatrix(i * m, j * m, &blk);
        }
    }
    a
}
