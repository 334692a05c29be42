//! Finite-bandwidth closed-loop model.
//!
//! State `z` stacks `[a_q, a_p, b_q, b_p]` per amplifier. The input vector
//! is `[xi_(i) (4 quadratures) ; xi_loss (4N quadratures)]`, the output is
//! the four quadratures of `[out_1, out_2]`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{NopaParams, PassiveNetwork};
use crate::numerics::{
    eigenvalues, kron, solve, sort_spectrum, spectral_abscissa, ComplexMatrix, Lu, RealMatrix,
};

/// Drift matrix of a single amplifier.
pub fn build_a1(p: &NopaParams) -> RealMatrix {
    let d = -(p.gamma + p.kappa) / 2.0;
    let e = p.epsilon / 2.0;
    RealMatrix::from_rows(&[
        vec![d, 0.0, e, 0.0],
        vec![0.0, d, 0.0, -e],
        vec![e, 0.0, d, 0.0],
        vec![0.0, -e, 0.0, d],
    ])
    .expect("4x4 literal")
}

#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: RealMatrix,
    pub d: RealMatrix,
    pub n_nopas: usize,
    pub params: NopaParams,
}

/// Closes the loop through the passive network.
///
/// From `xi_in = S21 xi_(i) + S22 xi_out` and `xi_out = sqrt(gamma) z + xi_in`:
/// `xi_in = (I - S22)^-1 (S21 xi_(i) + sqrt(gamma) S22 z)`, which is
/// substituted into the amplifier dynamics and the external outputs.
pub fn build_closed_loop(p: &NopaParams, net: &PassiveNetwork) -> Result<StateSpace> {
    let n = net.n_nopas();
    let blocks = net.blocks();
    let dim = 4 * n;
    let loop_gain = &RealMatrix::identity(dim) - &blocks.s22;
    let lu = Lu::new(&loop_gain)?;
    if lu.is_singular() {
        return Err(Error::IllPosed(format!(
            "I - S22 is singular (|det| ~ {:e})",
            lu.log_abs_det().exp()
        )));
    }
    let feed_state = lu.solve(&blocks.s22)?;
    let feed_input = lu.solve(&blocks.s21)?;
    let sg = p.gamma.sqrt();
    let sk = p.kappa.sqrt();

    let a = &kron(&RealMatrix::identity(n), &build_a1(p)) - &feed_state.scale(p.gamma);

    let mut b = RealMatrix::zeros(dim, 4 + dim);
    b.set_block(0, 0, &feed_input.scale(-sg));
    b.set_block(0, 4, &RealMatrix::identity(dim).scale(-sk));

    // S12 (sqrt(g) z + xi_in) = sqrt(g) S12 (I + (I-S22)^-1 S22) z + ...
    let c = (&blocks.s12 * &(&RealMatrix::identity(dim) + &feed_state)).scale(sg);

    let mut d = RealMatrix::zeros(4, 4 + dim);
    d.set_block(0, 0, &(&blocks.s11 + &(&blocks.s12 * &feed_input)));

    Ok(StateSpace {
        a,
        b,
        c,
        d,
        n_nopas: n,
        params: *p,
    })
}

#[derive(Debug, Clone)]
pub struct Stability {
    pub stable: bool,
    pub abscissa: f64,
    /// Sorted by real part, then imaginary part.
    pub spectrum: Vec<Complex64>,
}

impl StateSpace {
    pub fn stability(&self) -> Result<Stability> {
        let mut spectrum = eigenvalues(&self.a)?;
        sort_spectrum(&mut spectrum);
        let abscissa = spectral_abscissa(&spectrum);
        Ok(Stability {
            stable: abscissa < 0.0,
            abscissa,
            spectrum,
        })
    }

    /// `H(i omega) = C (i omega I - A)^-1 B + D`, shape `4 x (4 + 4N)`.
    pub fn transfer(&self, omega: f64) -> Result<ComplexMatrix> {
        let dim = self.a.rows();
        let i_omega = Complex64::new(0.0, omega);
        let resolvent = &ComplexMatrix::identity(dim).scale(i_omega) - &self.a.to_complex();
        let x = solve(&resolvent, &self.b.to_complex())?;
        Ok(&(&self.c.to_complex() * &x) + &self.d.to_complex())
    }
}

/// Hurwitz verdict (margin 0) plus the full spectrum of `A_N`.
pub fn stability(p: &NopaParams, net: &PassiveNetwork) -> Result<Stability> {
    build_closed_loop(p, net)?.stability()
}

pub fn transfer(ss: &StateSpace, omega: f64) -> Result<ComplexMatrix> {
    ss.transfer(omega)
}

/// Frequency-dependent coefficients of one amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NopaFrequencyResponse {
    pub h1: Complex64,
    pub h2: Complex64,
    pub h3: Complex64,
    pub h4: Complex64,
}

impl NopaFrequencyResponse {
    /// The 4x8 transfer `[W12 | W34]` mapping `[in_a, in_b, loss_a, loss_b]`
    /// quadratures to `[out_a, out_b]`.
    pub fn matrix(&self) -> ComplexMatrix {
        let z = Complex64::new(0.0, 0.0);
        let (h1, h2, h3, h4) = (self.h1, self.h2, self.h3, self.h4);
        ComplexMatrix::from_rows(&[
            vec![h1, z, h2, z, h3, z, h4, z],
            vec![z, h1, z, -h2, z, h3, z, -h4],
            vec![h2, z, h1, z, h4, z, h3, z],
            vec![z, -h2, z, h1, z, -h4, z, h3],
        ])
        .expect("4x8 literal")
    }
}

pub fn nopa_response(p: &NopaParams, omega: f64) -> Result<NopaFrequencyResponse> {
    let (eps, gamma, kappa) = (p.epsilon, p.gamma, p.kappa);
    let shifted = Complex64::new(gamma + kappa, 2.0 * omega);
    let loss_shift = Complex64::new(kappa, 2.0 * omega);
    let den = eps * eps - shifted * shifted;
    if den.norm() <= 1e-14 * (eps * eps + shifted.norm_sqr()) {
        return Err(Error::Pole(format!(
            "epsilon^2 = (gamma + kappa + 2i omega)^2 at omega = {omega}"
        )));
    }
    let root = (gamma * kappa).sqrt();
    Ok(NopaFrequencyResponse {
        h1: (eps * eps + gamma * gamma - loss_shift * loss_shift) / den,
        h2: Complex64::new(2.0 * eps * gamma, 0.0) / den,
        h3: 2.0 * root * shifted / den,
        h4: Complex64::new(2.0 * eps * root, 0.0) / den,
    })
}
