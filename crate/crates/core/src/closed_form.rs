//! Closed-form squeezing of the lossless CFB chain.
//!
//! `u` and `v` come from a scalar recurrence in `(m_k, n_k)`. The same values
//! are also reachable through three structured determinants `T1`, `T2`,
//! `T3`, which this module can assemble block by block as a cross-check.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{determinant, RealMatrix};
use crate::static_limit::{reflection, StaticCoefficients};

/// `|n_k|` below this aborts the recurrence.
pub const RECURRENCE_GUARD: f64 = 1e-12;

/// Relative agreement required between the two determinant evaluations.
pub const DETERMINANT_PATH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceState {
    pub k: usize,
    pub m: f64,
    pub n: f64,
}

/// Output of [`recurrences`]: the last state and `prod = n_0 n_1 ... n_{N-2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence {
    pub m: f64,
    pub n: f64,
    pub prod: f64,
    /// `states[j]` holds `(m_{j+1}, n_{j+1})`.
    pub states: Vec<RecurrenceState>,
}

impl Recurrence {
    /// `h1 h2 m + n - h2^2 n`, the shared denominator.
    pub fn denominator(&self, c: &StaticCoefficients) -> f64 {
        c.h1 * c.h2 * self.m + self.n - c.h2 * c.h2 * self.n
    }
}

fn require_chain(coeffs: &StaticCoefficients, n_nopas: usize) -> Result<()> {
    if n_nopas < 2 {
        return Err(Error::Domain(format!(
            "closed form needs at least 2 NOPAs, got {n_nopas}"
        )));
    }
    if !coeffs.is_lossless() {
        return Err(Error::Unsupported(
            "closed form exists only for the lossless chain (K = 0); use the spectrum path".into(),
        ));
    }
    Ok(())
}

/// Iterates `m_{k+1} = -h1 h2 + h1^2 m_k / n_k`, `n_{k+1} = 1 - h2^2 + h1 h2 m_k / n_k`
/// from `m_1 = 0`, `n_1 = 1` up to `k = N - 1`.
pub fn recurrences(coeffs: &StaticCoefficients, n_nopas: usize) -> Result<Recurrence> {
    require_chain(coeffs, n_nopas)?;
    let (h1, h2) = (coeffs.h1, coeffs.h2);
    let (mut m, mut n, mut prod) = (0.0, 1.0, 1.0);
    let mut states = vec![RecurrenceState { k: 1, m, n }];
    for k in 1..n_nopas - 1 {
        if n.abs() < RECURRENCE_GUARD {
            return Err(Error::DegenerateRecurrence { k, value: n.abs() });
        }
        prod *= n;
        let ratio = m / n;
        m = -h1 * h2 + h1 * h1 * ratio;
        n = 1.0 - h2 * h2 + h1 * h2 * ratio;
        states.push(RecurrenceState { k: k + 1, m, n });
    }
    Ok(Recurrence { m, n, prod, states })
}

/// Which output phase configurations are optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaClass {
    /// `|theta_a + theta_b| = pi`.
    SumIsPi,
    /// `theta_a + theta_b = 0` or `theta_a = theta_b = pi`.
    SumIsZeroOrBothPi,
    /// Every phase pair gives the same squeezing.
    Indifferent,
}

impl ThetaClass {
    pub fn from_upsilon(upsilon: f64) -> Self {
        if upsilon > 0.0 {
            Self::SumIsPi
        } else if upsilon < 0.0 {
            Self::SumIsZeroOrBothPi
        } else {
            Self::Indifferent
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SumIsPi => "sum-is-pi",
            Self::SumIsZeroOrBothPi => "sum-is-zero-or-both-pi",
            Self::Indifferent => "indifferent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormResult {
    pub n_nopas: usize,
    pub u: f64,
    pub v: f64,
    /// `u v`.
    pub upsilon: f64,
    /// The same sign indicator written with a single power of `prod`.
    pub theorem_upsilon: f64,
    /// Sign of `prod`; the two upsilon forms can only disagree in sign when negative.
    pub product_sign: f64,
    pub theta_class: ThetaClass,
    pub v_opt: f64,
}

impl ClosedFormResult {
    pub fn v_opt_db(&self) -> f64 {
        10.0 * self.v_opt.log10()
    }
}

/// Optimal squeezing `V = 2(u^2 + v^2 + 2 u v cos(theta_a + theta_b))` minimized over phases.
pub fn optimal_variance(u: f64, v: f64) -> f64 {
    let upsilon = u * v;
    if upsilon > 0.0 {
        2.0 * (u - v) * (u - v)
    } else if upsilon < 0.0 {
        2.0 * (u + v) * (u + v)
    } else {
        2.0 * (u * u + v * v)
    }
}

pub fn closed_form(coeffs: &StaticCoefficients, n_nopas: usize) -> Result<ClosedFormResult> {
    let rec = recurrences(coeffs, n_nopas)?;
    let (h1, h2) = (coeffs.h1, coeffs.h2);
    let (m, n) = (rec.m, rec.n);
    let d = rec.denominator(coeffs);
    if d == 0.0 || rec.prod == 0.0 {
        return Err(Error::DegenerateRecurrence {
            k: n_nopas - 1,
            value: d.abs().min(rec.prod.abs()),
        });
    }
    let h1n = h1.powi(n_nopas as i32);
    let u = h1n / (d * rec.prod);
    let v = h2 - h1 * h1 * (h1 * m - h2 * n) / d;
    let upsilon = u * v;
    let theorem_upsilon = h1n / (d * d * rec.prod)
        * (h1 * h2 * h2 * m - h1 * h1 * h1 * m + h2 * n - h2 * h2 * h2 * n + h1 * h1 * h2 * n);
    Ok(ClosedFormResult {
        n_nopas,
        u,
        v,
        upsilon,
        theorem_upsilon,
        product_sign: rec.prod.signum(),
        theta_class: ThetaClass::from_upsilon(upsilon),
        v_opt: optimal_variance(u, v),
    })
}

/// Canonical optimal phase pairs for a result's class.
pub fn optimal_thetas(result: &ClosedFormResult) -> Vec<(f64, f64)> {
    match result.theta_class {
        ThetaClass::SumIsPi => vec![(FRAC_PI_2, FRAC_PI_2)],
        ThetaClass::SumIsZeroOrBothPi | ThetaClass::Indifferent => vec![(0.0, 0.0)],
    }
}

pub fn t1_b(c: &StaticCoefficients) -> RealMatrix {
    let z = RealMatrix::zeros(2, 2);
    let r = reflection().scale(-c.h2);
    let i = RealMatrix::identity(2).scale(-c.h1);
    RealMatrix::from_blocks(&[vec![&z, &z], vec![&r, &i]]).expect("2x2 blocks")
}

pub fn t1_c(c: &StaticCoefficients) -> RealMatrix {
    let z = RealMatrix::zeros(2, 2);
    let r = reflection().scale(-c.h2);
    let i = RealMatrix::identity(2).scale(-c.h1);
    RealMatrix::from_blocks(&[vec![&i, &r], vec![&z, &z]]).expect("2x2 blocks")
}

pub fn t1_d(m: f64, n: f64) -> RealMatrix {
    let z = RealMatrix::zeros(2, 2);
    let i = RealMatrix::identity(2);
    let r = reflection().scale(m);
    let ni = RealMatrix::identity(2).scale(n);
    RealMatrix::from_blocks(&[vec![&i, &z], vec![&r, &ni]]).expect("2x2 blocks")
}

fn rows8(rows: [[f64; 8]; 8]) -> RealMatrix {
    RealMatrix::from_fn(8, 8, |i, j| rows[i][j])
}

fn rows4(rows: [[f64; 4]; 4]) -> RealMatrix {
    RealMatrix::from_fn(4, 4, |i, j| rows[i][j])
}

pub fn t1_template(c: &StaticCoefficients, m: f64, n: f64) -> RealMatrix {
    let (h1, h2) = (c.h1, c.h2);
    rows8([
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -h2, 0.0, -h1, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, h2, 0.0, -h1],
        [0.0, -h1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -h1, h2, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, m, 0.0, n, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, -m, 0.0, n],
    ])
}

pub fn t2_a(c: &StaticCoefficients, m: f64, n: f64) -> RealMatrix {
    rows4([
        [0.0, n, 0.0, -m],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-c.h1, 0.0, -c.h2, 0.0],
    ])
}

pub fn t2_b(c: &StaticCoefficients) -> RealMatrix {
    let (h1, h2) = (c.h1, c.h2);
    rows4([
        [0.0, 0.0, 0.0, 0.0],
        [-h2, 0.0, -h1, 0.0],
        [0.0, h2, 0.0, -h1],
        [1.0, 0.0, 0.0, 0.0],
    ])
}

pub fn t2_c(c: &StaticCoefficients) -> RealMatrix {
    let mut out = RealMatrix::zeros(4, 4);
    out[(0, 1)] = -c.h1;
    out[(0, 3)] = c.h2;
    out
}

pub fn t2_template(c: &StaticCoefficients, m: f64, n: f64) -> RealMatrix {
    let (h1, h2) = (c.h1, c.h2);
    rows8([
        [0.0, n, 0.0, -m, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, -h1, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, h2, 0.0, -h1, 0.0],
        [-h1, 0.0, -h2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, -h1, 0.0, h2, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ])
}

pub fn t3_template(c: &StaticCoefficients, m: f64, n: f64) -> RealMatrix {
    let i4 = RealMatrix::identity(4);
    let b = t1_b(c);
    let cc = t1_c(c);
    let d = t1_d(m, n);
    RealMatrix::from_blocks(&[vec![&i4, &b], vec![&cc, &d]]).expect("4x4 blocks")
}

/// Grows `prev` by one 4x4 block at the lower right.
fn extend_lower(prev: &RealMatrix, b: &RealMatrix, c: &RealMatrix, d: &RealMatrix) -> RealMatrix {
    let k = prev.rows();
    let mut out = RealMatrix::zeros(k + 4, k + 4);
    out.set_block(0, 0, prev);
    out.set_block(k - 4, k, b);
    out.set_block(k, k - 4, c);
    out.set_block(k, k, d);
    out
}

/// Grows `prev` by one 4x4 block at the upper left.
fn extend_upper(prev: &RealMatrix, a: &RealMatrix, b: &RealMatrix, c: &RealMatrix) -> RealMatrix {
    let k = prev.rows();
    let mut out = RealMatrix::zeros(k + 4, k + 4);
    out.set_block(4, 4, prev);
    out.set_block(0, 0, a);
    out.set_block(0, 4, b);
    out.set_block(4, 0, c);
    out
}

fn check_n(n_nopas: usize) -> Result<()> {
    if n_nopas < 2 {
        Err(Error::Domain(format!(
            "T matrices exist for N >= 2, got {n_nopas}"
        )))
    } else {
        Ok(())
    }
}

/// `T_{1,N}`: `Q_N` without its first row and third column, padded with a unit corner.
pub fn assemble_t1(c: &StaticCoefficients, n_nopas: usize) -> Result<RealMatrix> {
    check_n(n_nopas)?;
    let (b, cc, d) = (t1_b(c), t1_c(c), t1_d(0.0, 1.0));
    Ok((2..n_nopas).fold(t1_template(c, 0.0, 1.0), |t, _| {
        extend_lower(&t, &b, &cc, &d)
    }))
}

/// `T_{2,N}`: `Q_N` without its first row and `(4N-3)`-th column, padded with a unit corner.
pub fn assemble_t2(c: &StaticCoefficients, n_nopas: usize) -> Result<RealMatrix> {
    check_n(n_nopas)?;
    let (a, b, cc) = (t2_a(c, 0.0, 1.0), t2_b(c), t2_c(c));
    Ok((2..n_nopas).fold(t2_template(c, 0.0, 1.0), |t, _| {
        extend_upper(&t, &a, &b, &cc)
    }))
}

/// `T_{3,N} = Q_N`.
pub fn assemble_t3(c: &StaticCoefficients, n_nopas: usize) -> Result<RealMatrix> {
    check_n(n_nopas)?;
    let (b, cc, d) = (t1_b(c), t1_c(c), t1_d(0.0, 1.0));
    Ok((2..n_nopas).fold(t3_template(c, 0.0, 1.0), |t, _| {
        extend_lower(&t, &b, &cc, &d)
    }))
}

/// Determinants of `T1, T2, T3` and the `(u, v)` they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterminantEval {
    pub det_t1: f64,
    pub det_t2: f64,
    pub det_t3: f64,
    pub u: f64,
    pub v: f64,
}

impl DeterminantEval {
    fn from_dets(c: &StaticCoefficients, det_t1: f64, det_t2: f64, det_t3: f64) -> Result<Self> {
        if det_t3 == 0.0 {
            return Err(Error::Singular { det_magnitude: 0.0 });
        }
        Ok(Self {
            det_t1,
            det_t2,
            det_t3,
            u: c.h1 * det_t2 / det_t3,
            v: c.h1 * det_t1 / det_t3 + c.h2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterminantPath {
    /// From the recursive determinant formulas.
    pub recursive: DeterminantEval,
    /// From explicitly assembled matrices.
    pub assembled: DeterminantEval,
}

impl DeterminantPath {
    /// Largest `|a - b| / max(1, |a|)` over `u` and `v`.
    pub fn discrepancy(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
        rel(self.recursive.u, self.assembled.u).max(rel(self.recursive.v, self.assembled.v))
    }

    pub fn uv(&self) -> (f64, f64) {
        (self.assembled.u, self.assembled.v)
    }
}

/// Evaluates `(u, v)` through the `T` determinants two ways and demands agreement.
pub fn determinant_path(coeffs: &StaticCoefficients, n_nopas: usize) -> Result<DeterminantPath> {
    let rec = recurrences(coeffs, n_nopas)?;
    let (h1, h2) = (coeffs.h1, coeffs.h2);
    let d = rec.denominator(coeffs);
    let p = rec.prod;
    let recursive = DeterminantEval::from_dets(
        coeffs,
        p * p * (-h1 * (h1 * rec.m - h2 * rec.n) * d),
        h1.powi(n_nopas as i32 - 1) * d * p,
        d * d * p * p,
    )?;
    let assembled = DeterminantEval::from_dets(
        coeffs,
        determinant(&assemble_t1(coeffs, n_nopas)?)?,
        determinant(&assemble_t2(coeffs, n_nopas)?)?,
        determinant(&assemble_t3(coeffs, n_nopas)?)?,
    )?;
    let path = DeterminantPath {
        recursive,
        assembled,
    };
    let gap = path.discrepancy();
    if !(gap <= DETERMINANT_PATH_TOL) {
        return Err(Error::Structure(format!(
            "recursive and assembled determinants disagree (relative gap {gap:e})"
        )));
    }
    Ok(path)
}
