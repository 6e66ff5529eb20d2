//! Test matrices, error metrics and the experiment runner.

mod banded;
mod bie;
mod experiment;
mod grid;

pub use banded::{banded_inverse_oracle, BandedCholesky, BandedInverseOracle, SymmetricBand};
pub use bie::bie_star;
pub use experiment::{
    run_experiment, write_csv, Algorithm, ExperimentConfig, ExperimentRecord, MatrixKind, CSV_HEADER,
};
pub use grid::{grid_schur_oracle, GridSchurOracle};

use crate::kernels::{orthonormalize, RngStream};
use crate::matrix::DenseMatrix;
use crate::structures::{BlockDiagonal, LevelFactors, TelescopingFactorization};

/// `‖a − b‖_F / ‖a‖_F`.
pub fn frobenius_error(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let na = a.frobenius_norm();
    let diff = a.sub(b).frobenius_norm();
    if na == 0.0 {
        if diff == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        diff / na
    }
}

/// Random exact rank-`k` HSS factorization with orthonormal Gaussian bases
/// and Gaussian diagonal blocks.
pub fn random_hss(levels: usize, k: usize, seed: u64) -> TelescopingFactorization {
    let s = RngStream::new(seed).label(0x0048_5353);
    let lfs = (1..=levels)
        .map(|l| {
            let st = s.level(l);
            let part = |tag: u64, cols: usize, orth: bool| {
                let blocks = (0..1usize << l)
                    .map(|i| {
                        let g = st.label(tag).block(i).gaussian(2 * k, cols);
                        if orth { orthonormalize(&g) } else { g }
                    })
                    .collect();
                BlockDiagonal::new(blocks).expect("uniform blocks")
            };
            LevelFactors::new(part(0, k, true), part(1, k, true), part(2, 2 * k, false))
                .expect("consistent shapes")
        })
        .collect();
    TelescopingFactorization::new(k, lfs, s.label(1).gaussian(2 * k, 2 * k)).expect("consistent shapes")
}

/// Adversarial instance for the explicit greedy method, `N = 2^(L+1)`.
///
/// On a `2^L x 2^L` grid of `2 x 2` blocks, anti-diagonal blocks are
/// `[[0, 1+δ], [1, 0]]` and every other block (the diagonal included) is
/// the identity.
pub fn hard_instance(levels: usize, delta: f64) -> DenseMatrix {
    let nb = 1usize << levels;
    DenseMatrix::from_fn(2 * nb, 2 * nb, |r, c| {
        let (i, j, p, q) = (r / 2, c / 2, r % 2, c % 2);
        if i + j == nb - 1 {
            match (p, q) {
                (0, 1) => 1.0 + delta,
                (1, 0) => 1.0,
                _ => 0.0,
            }
        } else if p == q {
            1.0
        } else {
            0.0
        }
    })
}

/// The all-`½` matrix, a rank-one (hence HSS rank-one) competitor on the
/// hard instance.
pub fn hard_instance_reference(levels: usize) -> DenseMatrix {
    let n = 2usize << levels;
    DenseMatrix::from_fn(n, n, |_, _| 0.5)
}
