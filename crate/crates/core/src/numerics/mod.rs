//! Dense real and complex matrix kernel.
//!
//! Everything here is small and dense: the largest matrices in practice are
//! the `4N x 4N` closed-loop system matrices, so no sparse paths exist.

mod eigen;
mod lu;
mod matrix;

pub use eigen::{eigenvalues, is_hurwitz, sort_spectrum, spectral_abscissa, EIGEN_MAX_ITER};
pub use lu::{determinant, inverse, solve, Lu, SINGULAR_RTOL};
pub use matrix::{kron, ComplexMatrix, Matrix, RealMatrix, Scalar};
