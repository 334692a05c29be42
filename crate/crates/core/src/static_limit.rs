//! Infinite-bandwidth model of the amplifier network.
//!
//! Each amplifier becomes the constant map `out = W12 in + W34 loss` and the
//! whole network collapses to a single real matrix `H_N` of shape
//! `4 x (4 + 4N)`.

use crate::error::{Error, Result};
use crate::network::{NopaParams, PassiveNetwork};
use crate::numerics::{kron, Lu, RealMatrix};

/// Tolerance for the `u, v` transfer pattern of the CFB chain.
pub const CFB_PATTERN_TOL: f64 = 1e-9;

/// Agreement required between the two `u, v` read-outs.
pub const UV_AGREEMENT_TOL: f64 = 1e-10;

/// `diag(1, -1)`.
pub fn reflection() -> RealMatrix {
    RealMatrix::diag(&[1.0, -1.0])
}

/// Static amplifier coefficients `h1..h4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticCoefficients {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    /// `epsilon / gamma = x y`.
    pub pump_ratio: f64,
    /// `kappa / gamma = K x y`.
    pub loss_ratio: f64,
}

impl StaticCoefficients {
    /// Coefficients from the dimensionless `(x, y, K)`.
    pub fn new(x: f64, y: f64, k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) || !(y > 0.0 && y <= 1.0) {
            return Err(Error::Domain(format!(
                "need 0 <= x <= 1 and 0 < y <= 1, got x = {x}, y = {y}"
            )));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("K must be >= 0, got {k}")));
        }
        Self::from_ratios(x * y, k * x * y)
    }

    pub fn from_params(p: &NopaParams) -> Result<Self> {
        Self::from_ratios(p.pump_ratio(), p.loss_ratio())
    }

    pub fn from_ratios(pump_ratio: f64, loss_ratio: f64) -> Result<Self> {
        let r = pump_ratio;
        let l = loss_ratio;
        let den = r * r - (1.0 + l) * (1.0 + l);
        if den.abs() <= 1e-14 * (r * r + (1.0 + l) * (1.0 + l)) {
            return Err(Error::Pole(format!(
                "(xy)^2 = (1 + Kxy)^2 at xy = {r}, Kxy = {l}"
            )));
        }
        let root = l.sqrt();
        Ok(Self {
            h1: (r * r + 1.0 - l * l) / den,
            h2: 2.0 * r / den,
            h3: 2.0 * root * (1.0 + l) / den,
            h4: 2.0 * r * root / den,
            pump_ratio: r,
            loss_ratio: l,
        })
    }

    pub fn is_lossless(&self) -> bool {
        self.h3 == 0.0 && self.h4 == 0.0
    }

    pub fn w12(&self) -> RealMatrix {
        pair_block(self.h1, self.h2)
    }

    pub fn w34(&self) -> RealMatrix {
        pair_block(self.h3, self.h4)
    }
}

fn pair_block(diag: f64, cross: f64) -> RealMatrix {
    let i2 = RealMatrix::identity(2).scale(diag);
    let r = reflection().scale(cross);
    RealMatrix::from_blocks(&[vec![&i2, &r], vec![&r, &i2]]).expect("2x2 blocks")
}

/// `Q_N = I - S22 (I_N (x) W12)`.
pub fn loop_matrix(coeffs: &StaticCoefficients, net: &PassiveNetwork) -> RealMatrix {
    let n = net.n_nopas();
    let w = kron(&RealMatrix::identity(n), &coeffs.w12());
    &RealMatrix::identity(4 * n) - &(&net.blocks().s22 * &w)
}

#[derive(Debug, Clone)]
pub struct StaticTransfer {
    /// `4 x (4 + 4N)`; columns ordered `[xi_(i), xi_loss]`.
    pub h_n: RealMatrix,
    /// `(I - S22 (I (x) W12))^-1`.
    pub p_n: RealMatrix,
    pub w12: RealMatrix,
    pub w34: RealMatrix,
    pub coeffs: StaticCoefficients,
    pub n_nopas: usize,
}

impl StaticTransfer {
    /// The first four columns (vacuum inputs only).
    pub fn input_block(&self) -> RealMatrix {
        self.h_n.block(0, 0, 4, 4)
    }
}

pub fn static_transfer(
    coeffs: &StaticCoefficients,
    net: &PassiveNetwork,
) -> Result<StaticTransfer> {
    let n = net.n_nopas();
    let blocks = net.blocks();
    let q = loop_matrix(coeffs, net);
    let lu = Lu::new(&q)?;
    if lu.is_singular() {
        return Err(Error::IllPosed(format!(
            "I - S22 (I (x) W12) is singular (|det| ~ {:e}); a stable finite-bandwidth \
             system always makes it invertible, so this configuration is unstable",
            lu.log_abs_det().exp()
        )));
    }
    let p_n = lu.inverse()?;
    let id_n = RealMatrix::identity(n);
    let w12 = coeffs.w12();
    let w34 = coeffs.w34();
    let gain = kron(&id_n, &w12);
    let loss = kron(&id_n, &w34);
    // S12 (I (x) W12) P_N, shared by the input and loss terms.
    let through = &(&blocks.s12 * &gain) * &p_n;

    let input_part = &blocks.s11 + &(&through * &blocks.s21);
    let loss_part = &(&blocks.s12 * &loss) + &(&(&through * &blocks.s22) * &loss);

    let mut h_n = RealMatrix::zeros(4, 4 + 4 * n);
    h_n.set_block(0, 0, &input_part);
    h_n.set_block(0, 4, &loss_part);
    Ok(StaticTransfer {
        h_n,
        p_n,
        w12,
        w34,
        coeffs: *coeffs,
        n_nopas: n,
    })
}

/// Checks the block-parity pattern and central symmetry of an
/// `L^{2x2}`-matrix within `tol`.
///
/// 2x2 blocks `E[i][j]` (0-based, `0 <= i, j < 2N`) must be `e I` when
/// `i + j` is even and `e R` when odd, and
/// `E[i][j] = E[2N-1-i][2N-1-j]` for `j >= N`.
pub fn is_l2_matrix(m: &RealMatrix, tol: f64) -> bool {
    let dim = m.rows();
    if !m.is_square() || dim == 0 || !dim.is_multiple_of(4) {
        return false;
    }
    let nb = dim / 2;
    let half = nb / 2;
    for bi in 0..nb {
        for bj in 0..nb {
            let (r, c) = (2 * bi, 2 * bj);
            let a = m[(r, c)];
            let b = m[(r, c + 1)];
            let cc = m[(r + 1, c)];
            let d = m[(r + 1, c + 1)];
            if b.abs() > tol || cc.abs() > tol {
                return false;
            }
            let expected_d = if (bi + bj) % 2 == 0 { a } else { -a };
            if (d - expected_d).abs() > tol {
                return false;
            }
            if bj >= half {
                let (mr, mc) = (2 * (nb - 1 - bi), 2 * (nb - 1 - bj));
                for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    if (m[(r + di, c + dj)] - m[(mr + di, mc + dj)]).abs() > tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Builds an `L^{2x2}`-matrix of dimension `4n` from the free scalars
/// `e(i, j)`, `0 <= i < 2n`, `0 <= j < n`; the right half is mirrored.
pub fn l2_from_scalars(n: usize, mut e: impl FnMut(usize, usize) -> f64) -> RealMatrix {
    let nb = 2 * n;
    let mut scalars = vec![0.0; nb * nb];
    for i in 0..nb {
        for j in 0..n {
            scalars[i * nb + j] = e(i, j);
        }
    }
    for i in 0..nb {
        for j in n..nb {
            scalars[i * nb + j] = scalars[(nb - 1 - i) * nb + (nb - 1 - j)];
        }
    }
    let i2 = RealMatrix::identity(2);
    let r = reflection();
    let mut m = RealMatrix::zeros(2 * nb, 2 * nb);
    for i in 0..nb {
        for j in 0..nb {
            let base = if (i + j) % 2 == 0 { &i2 } else { &r };
            m.set_block(2 * i, 2 * j, &base.scale(scalars[i * nb + j]));
        }
    }
    m
}

/// `u, v` of the CFB chain read two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvPair {
    pub u: f64,
    pub v: f64,
    /// `h1 p_{4N-3,1} + h2 p_{4N-1,1}` (1-based indices).
    pub u_from_p: f64,
    /// `h1 p_{3,1} + h2 p_{1,1}`.
    pub v_from_p: f64,
    pub p_11: f64,
    pub p_4n_minus_1_1: f64,
}

/// Reads `u, v` from `H_N` and recomputes them from `P_N`.
///
/// Only meaningful for the lossless CFB chain, where the input block of
/// `H_N` is `[[u,0,v,0],[0,u,0,-v],[v,0,u,0],[0,-v,0,u]]`. Disagreement
/// between the two read-outs is an error.
pub fn extract_uv(st: &StaticTransfer) -> Result<UvPair> {
    if !st.coeffs.is_lossless() {
        return Err(Error::Unsupported(
            "u, v extraction requires the lossless case (K = 0)".into(),
        ));
    }
    let h = &st.h_n;
    let u = h[(0, 0)];
    let v = h[(0, 2)];
    let pattern = RealMatrix::from_rows(&[
        vec![u, 0.0, v, 0.0],
        vec![0.0, u, 0.0, -v],
        vec![v, 0.0, u, 0.0],
        vec![0.0, -v, 0.0, u],
    ])?;
    let scale = u.abs().max(v.abs()).max(1.0);
    let defect = st.input_block().max_abs_diff(&pattern);
    let loss_defect = h.block(0, 4, 4, h.cols() - 4).max_abs();
    if defect > CFB_PATTERN_TOL * scale || loss_defect > CFB_PATTERN_TOL * scale {
        return Err(Error::Structure(format!(
            "transfer does not have the CFB u/v pattern (defect {:e})",
            defect.max(loss_defect)
        )));
    }
    let n = st.n_nopas;
    let p = &st.p_n;
    let (h1, h2) = (st.coeffs.h1, st.coeffs.h2);
    let u_from_p = h1 * p[(4 * n - 4, 0)] + h2 * p[(4 * n - 2, 0)];
    let v_from_p = h1 * p[(2, 0)] + h2 * p[(0, 0)];
    let du = (u - u_from_p).abs();
    let dv = (v - v_from_p).abs();
    if du > UV_AGREEMENT_TOL * u.abs().max(1.0) || dv > UV_AGREEMENT_TOL * v.abs().max(1.0) {
        return Err(Error::Structure(format!(
            "u/v read-outs disagree: |du| = {du:e}, |dv| = {dv:e}"
        )));
    }
    Ok(UvPair {
        u,
        v,
        u_from_p,
        v_from_p,
        p_11: p[(0, 0)],
        p_4n_minus_1_1: p[(4 * n - 2, 0)],
    })
}
