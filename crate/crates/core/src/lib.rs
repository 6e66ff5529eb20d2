//! Rank-structured matrix approximation.
//!
//! Builds hierarchically semiseparable (HSS) approximations in telescoping
//! form, either from explicit entries (greedy level-by-level truncation) or
//! from products with the matrix and its transpose only. Also provides the
//! one-level block low-rank plus sparse (BLR²) recovery, a binary codec for
//! factorizations, and a set of test matrices for experiments.
//!
//! Block indices are 0-based throughout. Level `ℓ` of an `L`-level
//! factorization has `2^ℓ` blocks; the finest level is `L`.

pub mod blr2;
pub mod error;
pub mod greedy;
pub mod kernels;
pub mod matrix;
pub mod matvec;
pub mod oracle;
pub mod sketch;
pub mod structures;
pub mod testbed;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
