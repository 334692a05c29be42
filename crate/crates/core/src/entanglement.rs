//! Two-mode squeezing spectra and the EPR verdict.
//!
//! For output rows rotated by `theta_a`, `theta_b` the amplitude-sum and
//! phase-difference variances are `V+ = |r_Q H|^2` and `V- = |r_P H|^2`. Both
//! only depend on the real Gram matrix `G = Re(H H*)`, which is formed once and
//! then evaluated in closed trigonometric form.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::StateSpace;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Scalar};

/// Shot-noise level of `V+ + V-`.
pub const SHOT_NOISE_TOTAL: f64 = 4.0;

pub const DEFAULT_SEARCH_GRID: usize = 360;

/// Angular resolution of the golden-section refinement.
pub const REFINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingResult {
    /// `None` for a static (infinite-bandwidth) transfer.
    pub omega: Option<f64>,
    pub theta_a: f64,
    pub theta_b: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub v_total: f64,
    pub entangled: bool,
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// `Re(H H*)` of a 4-row transfer, ready for phase evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingGram {
    g: [[f64; 4]; 4],
}

impl SqueezingGram {
    pub fn new<T: Scalar>(h: &Matrix<T>) -> Result<Self> {
        if h.rows() != 4 {
            return Err(Error::Dimension(format!(
                "squeezing needs a transfer with 4 rows, got {}",
                h.rows()
            )));
        }
        let mut g = [[0.0; 4]; 4];
        for (i, gi) in g.iter_mut().enumerate() {
            for (j, gij) in gi.iter_mut().enumerate() {
                *gij = h
                    .row(i)
                    .iter()
                    .zip(h.row(j))
                    .map(|(&a, &b)| (a * b.conj()).real())
                    .sum();
            }
        }
        Ok(Self { g })
    }

    pub fn entries(&self) -> &[[f64; 4]; 4] {
        &self.g
    }

    /// `(V+, V-)` at the given output phases.
    pub fn variances(&self, theta_a: f64, theta_b: f64) -> (f64, f64) {
        let g = &self.g;
        let (s2a, c2a) = (2.0 * theta_a).sin_cos();
        let (s2b, c2b) = (2.0 * theta_b).sin_cos();
        let (s_sum, c_sum) = (theta_a + theta_b).sin_cos();
        let (s_diff, c_diff) = (theta_a - theta_b).sin_cos();

        let mean = 0.5 * (g[0][0] + g[1][1]) + 0.5 * (g[2][2] + g[3][3]);
        let aniso_a = 0.5 * (g[0][0] - g[1][1]) * c2a;
        let aniso_b = 0.5 * (g[2][2] - g[3][3]) * c2b;
        let rot = g[0][1] * s2a + g[2][3] * s2b;
        let sum_part = (g[0][2] - g[1][3]) * c_sum - (g[0][3] + g[1][2]) * s_sum;
        let diff_part = (g[0][2] + g[1][3]) * c_diff;
        let skew = (g[0][3] - g[1][2]) * s_diff;

        let v_plus = mean + aniso_a + aniso_b - rot + sum_part + diff_part + skew;
        let v_minus = mean - aniso_a - aniso_b + rot + sum_part - diff_part - skew;
        (v_plus, v_minus)
    }

    pub fn total(&self, theta_a: f64, theta_b: f64) -> f64 {
        let (p, m) = self.variances(theta_a, theta_b);
        p + m
    }

    pub fn evaluate(&self, omega: Option<f64>, theta_a: f64, theta_b: f64) -> SqueezingResult {
        let (v_plus, v_minus) = self.variances(theta_a, theta_b);
        let v_total = v_plus + v_minus;
        SqueezingResult {
            omega,
            theta_a,
            theta_b,
            v_plus,
            v_minus,
            v_total,
            entangled: v_total < SHOT_NOISE_TOTAL,
        }
    }
}

/// Squeezing of a static or frequency-domain transfer at fixed output phases.
pub fn squeezing<T: Scalar>(h: &Matrix<T>, theta_a: f64, theta_b: f64) -> Result<SqueezingResult> {
    Ok(SqueezingGram::new(h)?.evaluate(None, theta_a, theta_b))
}

/// Squeezing at each frequency of `omegas` (rad/s); the system must be stable.
pub fn squeezing_spectrum(
    ss: &StateSpace,
    omegas: &[f64],
    theta_a: f64,
    theta_b: f64,
) -> Result<Vec<SqueezingResult>> {
    let stab = ss.stability()?;
    if !stab.stable {
        return Err(Error::Unstable {
            abscissa: stab.abscissa,
        });
    }
    omegas
        .iter()
        .map(|&w| {
            let h = ss.transfer(w)?;
            Ok(SqueezingGram::new(&h)?.evaluate(Some(w), theta_a, theta_b))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VanishingSearch {
    pub psi_1: f64,
    pub psi_2: f64,
    pub v_total: f64,
    /// Some phase pair certifies entanglement.
    pub entangled: bool,
}

/// Minimizes `V+ + V-` over both output phases: grid search then golden-section refinement.
pub fn vanishing_search<T: Scalar>(h: &Matrix<T>, grid: usize) -> Result<VanishingSearch> {
    if grid < 8 {
        return Err(Error::Domain(format!(
            "search grid must be >= 8, got {grid}"
        )));
    }
    let gram = SqueezingGram::new(h)?;
    Ok(search_gram(&gram, grid))
}

pub fn search_gram(gram: &SqueezingGram, grid: usize) -> VanishingSearch {
    let step = 2.0 * PI / grid as f64;
    let angle = |i: usize| -PI + step * (i + 1) as f64;
    let mut best = (angle(grid - 1), angle(grid - 1), f64::INFINITY);
    for i in 0..grid {
        for j in 0..grid {
            let (a, b) = (angle(i), angle(j));
            let v = gram.total(a, b);
            if v < best.2 {
                best = (a, b, v);
            }
        }
    }
    let (mut a, mut b, mut v) = best;
    let mut width = step;
    for _ in 0..100 {
        let a_new = golden_min(|t| gram.total(t, b), a - width, a + width);
        let b_new = golden_min(|t| gram.total(a_new, t), b - width, b + width);
        let v_new = gram.total(a_new, b_new);
        let moved = (a_new - a).abs().max((b_new - b).abs());
        if v_new <= v {
            a = a_new;
            b = b_new;
            v = v_new;
        }
        if moved < REFINE_TOL {
            break;
        }
        width = width.min(4.0 * moved).max(REFINE_TOL);
    }
    VanishingSearch {
        psi_1: wrap_angle(a),
        psi_2: wrap_angle(b),
        v_total: v,
        entangled: v < SHOT_NOISE_TOTAL,
    }
}

/// Golden-section minimum of a unimodal `f` on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 0.1 * REFINE_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
