use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular (|det| ~ {det_magnitude:e})")]
    Singular { det_magnitude: f64 },

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not unitary: max |S*S - I| = {deviation:e} at entry ({row}, {col})")]
    NotUnitary {
        deviation: f64,
        row: usize,
        col: usize,
    },

    #[error("network is ill-posed: {0}")]
    IllPosed(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("degenerate recurrence: |n_{k}| = {value:e} is too small to divide by")]
    DegenerateRecurrence { k: usize, value: f64 },

    #[error("system is unstable (spectral abscissa {abscissa:e})")]
    Unstable { abscissa: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Input(String),
}
