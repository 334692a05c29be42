//! Entanglement spectra of networks of nondegenerate optical parametric
//! amplifiers (NOPAs) joined by a static passive linear network.
//!
//! The crate covers the finite-bandwidth closed-loop model, its static
//! (infinite-bandwidth) limit, two-mode squeezing spectra, and closed-form
//! squeezing for the coherent-feedback chain cross-checked against matrix
//! and determinant derivations.

pub mod closed_form;
pub mod dynamics;
pub mod entanglement;
mod error;
pub mod network;
pub mod numerics;
pub mod static_limit;
pub mod verify;

pub use error::{Error, Result};
