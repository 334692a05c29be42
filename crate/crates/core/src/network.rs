//! Passive interconnect and amplifier parameters.
//!
//! Field ordering is fixed everywhere: the network input vector is
//! `[in_1, in_2, out_{a,1}, out_{b,1}, ..., out_{a,N}, out_{b,N}]` and the
//! output vector is `[out_1, out_2, in_{a,1}, in_{b,1}, ..., in_{a,N}, in_{b,N}]`.
//! In quadrature form every field expands to its `(q, p)` pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kron, ComplexMatrix, RealMatrix};

/// Reference mirror transmissivity rate in Hz.
pub const REFERENCE_RATE_HZ: f64 = 7.2e7;

/// Tolerance on `|S*S - I|` accepted by [`to_quadrature`].
pub const QUADRATURE_UNITARY_TOL: f64 = 1e-10;

/// Tolerance enforced on every constructed [`PassiveNetwork`].
pub const NETWORK_TOL: f64 = 1e-12;

/// Loss proportionality `K` such that `kappa = 3e6 / sqrt(2)` at `epsilon = 0.6 gamma_r`.
pub fn default_loss_proportionality(gamma_r: f64) -> f64 {
    3e6 / (std::f64::consts::SQRT_2 * 0.6 * gamma_r)
}

/// Dimensionless parameterization `epsilon = x gamma_r`, `gamma = gamma_r / y`,
/// `kappa = K epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma_r: f64,
}

/// Physical rates of one amplifier, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NopaParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub normalized: Option<NormalizedParams>,
}

impl NopaParams {
    pub fn new(epsilon: f64, gamma: f64, kappa: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be > 0, got {gamma}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            gamma,
            kappa,
            normalized: None,
        })
    }

    /// `x = 0` is admitted as the pump-off limit.
    pub fn normalized(x: f64, y: f64, k: f64, gamma_r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x must lie in [0, 1], got {x}")));
        }
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::Domain(format!("y must lie in (0, 1], got {y}")));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("K must be >= 0, got {k}")));
        }
        if !(gamma_r > 0.0 && gamma_r.is_finite()) {
            return Err(Error::Domain(format!("gamma_r must be > 0, got {gamma_r}")));
        }
        let epsilon = x * gamma_r;
        let mut p = Self::new(epsilon, gamma_r / y, k * epsilon)?;
        p.normalized = Some(NormalizedParams { x, y, k, gamma_r });
        Ok(p)
    }

    pub fn lossless(x: f64, y: f64) -> Result<Self> {
        Self::normalized(x, y, 0.0, REFERENCE_RATE_HZ)
    }

    /// `epsilon / gamma`, which equals `x y`.
    pub fn pump_ratio(&self) -> f64 {
        self.epsilon / self.gamma
    }

    /// `kappa / gamma`, which equals `K x y`.
    pub fn loss_ratio(&self) -> f64 {
        self.kappa / self.gamma
    }

    pub fn is_lossless(&self) -> bool {
        self.kappa == 0.0
    }
}

/// `S_11 (4x4)`, `S_12 (4x4N)`, `S_21 (4Nx4)`, `S_22 (4Nx4N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureBlocks {
    pub s11: RealMatrix,
    pub s12: RealMatrix,
    pub s21: RealMatrix,
    pub s22: RealMatrix,
}

impl QuadratureBlocks {
    pub fn n_nopas(&self) -> usize {
        self.s22.rows() / 4
    }

    pub fn reassemble(&self) -> RealMatrix {
        RealMatrix::from_blocks(&[vec![&self.s11, &self.s12], vec![&self.s21, &self.s22]])
            .expect("partition blocks are consistent by construction")
    }
}

/// Validated static passive network connecting N amplifiers.
#[derive(Debug, Clone)]
pub struct PassiveNetwork {
    n_nopas: usize,
    s_complex: ComplexMatrix,
    s_quad: RealMatrix,
    blocks: QuadratureBlocks,
    is_cfb: bool,
}

impl PassiveNetwork {
    /// Wraps a user-supplied unitary of dimension `2(n_nopas + 1)`.
    pub fn new(n_nopas: usize, s_complex: ComplexMatrix) -> Result<Self> {
        if n_nopas == 0 {
            return Err(Error::Domain("a network needs at least one NOPA".into()));
        }
        let dim = 2 * (n_nopas + 1);
        if s_complex.rows() != dim || s_complex.cols() != dim {
            return Err(Error::Dimension(format!(
                "{n_nopas} NOPAs need a {dim}x{dim} matrix, got {}x{}",
                s_complex.rows(),
                s_complex.cols()
            )));
        }
        check_unitary(&s_complex, NETWORK_TOL)?;
        let s_quad = to_quadrature(&s_complex)?;
        let (orth, sympl) = quadrature_defects(&s_quad);
        if orth >= NETWORK_TOL || sympl >= NETWORK_TOL {
            return Err(Error::Structure(format!(
                "quadrature form defects: orthogonality {orth:e}, symplecticity {sympl:e}"
            )));
        }
        let blocks = partition(&s_quad)?;
        let is_cfb = s_complex == cfb_topology(n_nopas)?;
        Ok(Self {
            n_nopas,
            s_complex,
            s_quad,
            blocks,
            is_cfb,
        })
    }

    /// The N-amplifier coherent-feedback chain.
    pub fn cfb(n_nopas: usize) -> Result<Self> {
        Self::new(n_nopas, cfb_topology(n_nopas)?)
    }

    pub fn n_nopas(&self) -> usize {
        self.n_nopas
    }

    pub fn s_complex(&self) -> &ComplexMatrix {
        &self.s_complex
    }

    pub fn s_quad(&self) -> &RealMatrix {
        &self.s_quad
    }

    pub fn blocks(&self) -> &QuadratureBlocks {
        &self.blocks
    }

    /// True when the complex matrix is exactly the coherent-feedback chain.
    pub fn is_cfb(&self) -> bool {
        self.is_cfb
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        file.into_network()
    }

    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            n_nopas: self.n_nopas,
            entries: self
                .s_complex
                .as_slice()
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network file serializes")
    }
}

/// On-disk form of a user-defined interconnect: row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n_nopas: usize,
    pub entries: Vec<[f64; 2]>,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<PassiveNetwork> {
        let dim = 2 * (self.n_nopas + 1);
        let data = self
            .entries
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        let s = ComplexMatrix::from_vec(dim, dim, data)?;
        PassiveNetwork::new(self.n_nopas, s)
    }
}

/// The CFB chain interconnect of dimension `2(n+1)`.
///
/// The `a` fields run `in_1 -> a_1 -> ... -> a_N -> out_1` and the `b`
/// fields run `in_2 -> b_N -> ... -> b_1 -> out_2`.
pub fn cfb_topology(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::Domain("CFB chain needs n >= 1".into()));
    }
    let m1 = RealMatrix::diag(&[0.0, 1.0]);
    let m2 = RealMatrix::diag(&[1.0, 0.0]);
    let chain1 = kron(&RealMatrix::identity(n), &m1);
    let chain2 = kron(&RealMatrix::identity(n), &m2);
    let dim = 2 * (n + 1);
    let mut first = RealMatrix::zeros(dim, dim);
    first.set_block(0, 2, &chain1);
    first.set_block(2 * n, 0, &m1);
    let mut second = RealMatrix::zeros(dim, dim);
    second.set_block(0, 2 * n, &m2);
    second.set_block(2, 0, &chain2);
    Ok((&first + &second).to_complex())
}

/// Checks `|S*S - I|` and `|SS* - I|` below `tol`.
pub fn check_unitary(s: &ComplexMatrix, tol: f64) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "unitary check needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let id = ComplexMatrix::identity(s.rows());
    let left = (&s.adjoint() * s).worst_entry_diff(&id);
    let right = (s * &s.adjoint()).worst_entry_diff(&id);
    let worst = if left.2 >= right.2 { left } else { right };
    if worst.2 >= tol {
        return Err(Error::NotUnitary {
            deviation: worst.2,
            row: worst.0,
            col: worst.1,
        });
    }
    Ok(())
}

/// `I_modes (x) [[0, 1], [-1, 0]]`.
pub fn symplectic_form(modes: usize) -> RealMatrix {
    let j = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).expect("2x2");
    kron(&RealMatrix::identity(modes), &j)
}

/// `(max |S^T S - I|, max |S^T J S - J|)` of a quadrature-form matrix.
pub fn quadrature_defects(s: &RealMatrix) -> (f64, f64) {
    let st = s.transpose();
    let orth = (&st * s).max_abs_diff(&RealMatrix::identity(s.rows()));
    let j = symplectic_form(s.rows() / 2);
    let sympl = (&(&st * &j) * s).max_abs_diff(&j);
    (orth, sympl)
}

/// Real quadrature form `1/2 K S K* + 1/2 K# S# K^T` with `K = I (x) [1, -i]^T`.
pub fn to_quadrature(s: &ComplexMatrix) -> Result<RealMatrix> {
    check_unitary(s, QUADRATURE_UNITARY_TOL)?;
    let k_pair = ComplexMatrix::from_rows(&[
        vec![Complex64::new(1.0, 0.0)],
        vec![Complex64::new(0.0, -1.0)],
    ])?;
    let k = kron(&ComplexMatrix::identity(s.rows()), &k_pair);
    let half = Complex64::new(0.5, 0.0);
    let first = &(&k * s) * &k.adjoint();
    let second = &(&k.conj() * &s.conj()) * &k.transpose();
    let full = (&first + &second).scale(half);
    let residue = full.im().max_abs();
    if residue >= 1e-12 {
        return Err(Error::Structure(format!(
            "quadrature form has imaginary residue {residue:e}"
        )));
    }
    Ok(full.re())
}

/// Splits a `4(N+1)` quadrature matrix into the external/internal blocks.
pub fn partition(s_quad: &RealMatrix) -> Result<QuadratureBlocks> {
    let dim = s_quad.rows();
    if !s_quad.is_square() || !dim.is_multiple_of(4) || dim < 8 {
        return Err(Error::Dimension(format!(
            "partition needs a square 4(N+1) matrix with N >= 1, got {}x{}",
            s_quad.rows(),
            s_quad.cols()
        )));
    }
    let inner = dim - 4;
    Ok(QuadratureBlocks {
        s11: s_quad.block(0, 0, 4, 4),
        s12: s_quad.block(0, 4, 4, inner),
        s21: s_quad.block(4, 0, inner, 4),
        s22: s_quad.block(4, 4, inner, inner),
    })
}
