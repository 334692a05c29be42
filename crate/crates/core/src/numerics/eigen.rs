use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use super::matrix::RealMatrix;
use crate::error::{Error, Result};

/// Iteration cap for the shifted QR sweeps.
pub const EIGEN_MAX_ITER: usize = 10_000;

/// Full spectrum of a real square matrix, multiplicities included.
pub fn eigenvalues(m: &RealMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues require a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dm = DMatrix::from_row_slice(n, n, m.as_slice());
    let schur = Schur::try_new(dm, f64::EPSILON, EIGEN_MAX_ITER).ok_or(Error::NoConvergence {
        iterations: EIGEN_MAX_ITER,
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(spectrum: &[Complex64]) -> f64 {
    spectrum
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True iff every eigenvalue has real part strictly below `-margin`.
pub fn is_hurwitz(m: &RealMatrix, margin: f64) -> Result<bool> {
    if !(margin >= 0.0) {
        return Err(Error::Domain(format!("margin must be >= 0, got {margin}")));
    }
    Ok(eigenvalues(m)?.iter().all(|z| z.re < -margin))
}

/// Sorts a spectrum by real part, then imaginary part.
pub fn sort_spectrum(spectrum: &mut [Complex64]) {
    spectrum.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
