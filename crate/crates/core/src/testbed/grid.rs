use rayon::prelude::*;

use super::banded::{BandedCholesky, SymmetricBand};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::oracle::{check_input, MatvecOracle};

/// Width of each half of the grid on either side of the separator.
const HALF_WIDTH: usize = 25;

/// Schur complement of the graph Laplacian of a `rows x 51` grid onto its
/// middle column.
///
/// The grid splits into the left 25 columns `V₁`, the right 25 columns
/// `V₂` and the separator column `V₃`; the operator is
/// `L₃₃ − L₃₁ L₁₁⁻¹ L₁₃ − L₃₂ L₂₂⁻¹ L₂₃`, applied with banded Cholesky
/// solves on each half (row-major ordering, half-bandwidth 25).
#[derive(Clone, Debug)]
pub struct GridSchurOracle {
    rows: usize,
    /// Both halves have the same Laplacian block by mirror symmetry.
    half: BandedCholesky,
}

/// Graph-Laplacian block of one `rows x 25` half, including the degree
/// contribution of the edge to the separator.
fn half_laplacian(rows: usize) -> SymmetricBand {
    let w = HALF_WIDTH;
    let mut m = SymmetricBand::zeros(rows * w, w);
    for r in 0..rows {
        for c in 0..w {
            let i = r * w + c;
            // Column w − 1 touches the separator.
            let mut degree = if c == w - 1 { 1.0 } else { 0.0 };
            if c + 1 < w {
                m.set(i, i + 1, -1.0);
                degree += 1.0;
            }
            if c > 0 {
                degree += 1.0;
            }
            if r + 1 < rows {
                m.set(i, i + w, -1.0);
                degree += 1.0;
            }
            if r > 0 {
                degree += 1.0;
            }
            m.set(i, i, degree);
        }
    }
    m
}

impl GridSchurOracle {
    pub fn new(rows: usize) -> Result<Self> {
        if rows < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 rows, got {rows}")));
        }
        Ok(Self { rows, half: BandedCholesky::new(&half_laplacian(rows))? })
    }

    fn separator_degree(&self, r: usize) -> f64 {
        2.0 + f64::from(u8::from(r > 0)) + f64::from(u8::from(r + 1 < self.rows))
    }

    fn apply_column(&self, x: &[f64]) -> Vec<f64> {
        let (n, w) = (self.rows, HALF_WIDTH);
        // Both halves see the separator through their column adjacent to it
        // (ordered so that column is w − 1), hence one solve serves both.
        let mut b = vec![0.0; n * w];
        for r in 0..n {
            b[r * w + w - 1] = -x[r];
        }
        self.half.solve_in_place(&mut b);
        (0..n)
            .map(|r| {
                let mut y = self.separator_degree(r) * x[r];
                if r > 0 {
                    y -= x[r - 1];
                }
                if r + 1 < n {
                    y -= x[r + 1];
                }
                // −L₃₁ w₁ − L₃₂ w₂ with w₁ = w₂ = b.
                y + 2.0 * b[r * w + w - 1]
            })
            .collect()
    }
}

impl MatvecOracle for GridSchurOracle {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self.rows, x)?;
        let cols: Vec<Vec<f64>> = (0..x.cols()).into_par_iter().map(|c| self.apply_column(&x.column(c))).collect();
        Ok(DenseMatrix::from_fn(self.rows, x.cols(), |i, j| cols[j][i]))
    }

    fn apply_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply(x)
    }
}

pub fn grid_schur_oracle(rows: usize) -> Result<GridSchurOracle> {
    GridSchurOracle::new(rows)
}
