//! Seeded randomized verification suites.
//!
//! Every trial draws its instance from a ChaCha stream keyed by
//! `(seed, suite, trial)`, so any single trial can be regenerated in
//! isolation. A failing instance is recorded in full and can be re-checked
//! with [`replay`] without the generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::{closed_form, determinant_path};
use crate::dynamics::build_closed_loop;
use crate::error::{Error, Result};
use crate::network::{
    check_unitary, quadrature_defects, to_quadrature, NetworkFile, NopaParams, PassiveNetwork,
    NETWORK_TOL, REFERENCE_RATE_HZ,
};
use crate::numerics::{inverse, ComplexMatrix, Lu, RealMatrix};
use crate::static_limit::{
    extract_uv, is_l2_matrix, l2_from_scalars, loop_matrix, static_transfer, StaticCoefficients,
};
use num_complex::Complex64;

pub const DEFAULT_SEED: u64 = 20_151_104;
pub const DEFAULT_TRIALS: usize = 200;

/// Relative tolerance for product closure.
pub const PROP1_TOL: f64 = 1e-12;
/// Relative tolerance for inverse closure.
pub const PROP2_TOL: f64 = 1e-8;
/// Condition-number ceiling for inverse witnesses.
pub const MAX_CONDITION: f64 = 1e6;
pub const SYMPLECTIC_TOL: f64 = 1e-12;
pub const THREE_PATH_TOL: f64 = 1e-9;
pub const OMEGA0_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Prop1,
    Prop2,
    Lemma1,
    Symplectic,
    ThreePath,
    Omega0,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Prop1,
        Suite::Prop2,
        Suite::Lemma1,
        Suite::Symplectic,
        Suite::ThreePath,
        Suite::Omega0,
    ];

    fn id(self) -> u64 {
        self as u64
    }
}

/// Deliberate corruption used to exercise the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fault {
    pub row: usize,
    pub col: usize,
    pub delta: f64,
}

impl Default for Fault {
    fn default() -> Self {
        Self {
            row: 0,
            col: 0,
            delta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Instance {
    Prop1 {
        n: usize,
        e: Vec<f64>,
        f: Vec<f64>,
    },
    Prop2 {
        n: usize,
        e: Vec<f64>,
    },
    Lemma1 {
        x: f64,
        y: f64,
        k: f64,
        network: NetworkFile,
    },
    Symplectic {
        dim: usize,
        entries: Vec<[f64; 2]>,
    },
    ThreePath {
        n_nopas: usize,
        x: f64,
        y: f64,
    },
    Omega0 {
        n_nopas: usize,
        x: f64,
        y: f64,
        k: f64,
    },
}

impl Instance {
    pub fn suite(&self) -> Suite {
        match self {
            Instance::Prop1 { .. } => Suite::Prop1,
            Instance::Prop2 { .. } => Suite::Prop2,
            Instance::Lemma1 { .. } => Suite::Lemma1,
            Instance::Symplectic { .. } => Suite::Symplectic,
            Instance::ThreePath { .. } => Suite::ThreePath,
            Instance::Omega0 { .. } => Suite::Omega0,
        }
    }
}

/// Result of checking one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    /// The property's hypothesis does not hold (e.g. unstable instance).
    Vacuous {
        reason: String,
    },
    Fail {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub seed: u64,
    pub trial: usize,
    pub instance: Instance,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: usize,
    pub passed: usize,
    pub vacuous: usize,
    pub failed: usize,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.failed == 0)
    }

    pub fn total_failed(&self) -> usize {
        self.suites.iter().map(|s| s.failed).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub trials: usize,
    pub suites: Vec<Suite>,
    /// Applied to every symplectic instance.
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
            suites: Suite::ALL.to_vec(),
            fault: None,
        }
    }
}

/// Independent stream for one trial.
pub fn trial_rng(seed: u64, suite: Suite, trial: usize) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&suite.id().to_le_bytes());
    key[16..24].copy_from_slice(&(trial as u64).to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

pub fn run(config: &VerifyConfig) -> VerifyReport {
    let suites = config
        .suites
        .iter()
        .map(|&suite| run_suite(config, suite))
        .collect();
    VerifyReport {
        seed: config.seed,
        trials: config.trials,
        suites,
    }
}

pub fn run_suite(config: &VerifyConfig, suite: Suite) -> SuiteReport {
    let mut report = SuiteReport {
        suite,
        trials: config.trials,
        passed: 0,
        vacuous: 0,
        failed: 0,
        failures: Vec::new(),
    };
    for trial in 0..config.trials {
        let instance = generate(config.seed, suite, trial, config.fault);
        match check(&instance) {
            Outcome::Pass => report.passed += 1,
            Outcome::Vacuous { .. } => report.vacuous += 1,
            Outcome::Fail { message } => {
                report.failed += 1;
                report.failures.push(FailureRecord {
                    seed: config.seed,
                    trial,
                    instance,
                    message,
                });
            }
        }
    }
    report
}

/// Re-checks a recorded instance.
pub fn replay(record: &FailureRecord) -> Outcome {
    check(&record.instance)
}

/// Draws the instance for `(seed, suite, trial)`.
pub fn generate(seed: u64, suite: Suite, trial: usize, fault: Option<Fault>) -> Instance {
    let mut rng = trial_rng(seed, suite, trial);
    match suite {
        Suite::Prop1 => {
            let n = rng.gen_range(1..=4);
            Instance::Prop1 {
                n,
                e: l2_scalars(&mut rng, n),
                f: l2_scalars(&mut rng, n),
            }
        }
        Suite::Prop2 => {
            let n = rng.gen_range(1..=4);
            loop {
                let e = l2_scalars(&mut rng, n);
                if condition_number(&l2_matrix(n, &e)).is_some_and(|c| c <= MAX_CONDITION) {
                    break Instance::Prop2 { n, e };
                }
            }
        }
        Suite::Lemma1 => {
            let n = rng.gen_range(1..=6);
            let x = 10f64.powf(rng.gen_range(-3.0..0.0));
            let y = rng.gen_range(0.05..=1.0);
            let k = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..2.0)
            };
            let s = if rng.gen_bool(0.5) {
                crate::network::cfb_topology(n).expect("n >= 1")
            } else {
                random_unitary(&mut rng, 2 * (n + 1))
            };
            Instance::Lemma1 {
                x,
                y,
                k,
                network: network_file(n, &s),
            }
        }
        Suite::Symplectic => {
            let dim = 2 * rng.gen_range(1..=7);
            let mut s = random_unitary(&mut rng, dim);
            if let Some(f) = fault {
                let (r, c) = (f.row % dim, f.col % dim);
                s[(r, c)] += Complex64::new(f.delta, 0.0);
            }
            Instance::Symplectic {
                dim,
                entries: s.as_slice().iter().map(|z| [z.re, z.im]).collect(),
            }
        }
        Suite::ThreePath => {
            let n_nopas = rng.gen_range(2..=10);
            let y = if rng.gen_bool(0.5) {
                rng.gen_range(0.05..=1.0)
            } else {
                [0.5, 1.0][rng.gen_range(0..2)]
            };
            let x_max = (0.8 / (n_nopas as f64 * y)).min(1.0);
            Instance::ThreePath {
                n_nopas,
                x: rng.gen_range(0.0..x_max),
                y,
            }
        }
        Suite::Omega0 => {
            let n_nopas = rng.gen_range(1..=6);
            let y = rng.gen_range(0.05..=1.0);
            let x_max = (0.8 / (n_nopas as f64 * y)).min(1.0);
            Instance::Omega0 {
                n_nopas,
                x: rng.gen_range(0.0..x_max),
                y,
                k: rng.gen_range(0.0..1.0),
            }
        }
    }
}

/// Checks one instance against its property.
pub fn check(instance: &Instance) -> Outcome {
    match try_check(instance) {
        Ok(outcome) => outcome,
        Err(e) => Outcome::Fail {
            message: e.to_string(),
        },
    }
}

fn fail(message: String) -> Result<Outcome> {
    Ok(Outcome::Fail { message })
}

fn try_check(instance: &Instance) -> Result<Outcome> {
    match instance {
        Instance::Prop1 { n, e, f } => {
            let prod = &l2_matrix(*n, e) * &l2_matrix(*n, f);
            let tol = PROP1_TOL * prod.max_abs().max(1.0);
            if is_l2_matrix(&prod, tol) {
                Ok(Outcome::Pass)
            } else {
                fail(format!(
                    "product of L2 matrices (n = {n}) breaks the pattern"
                ))
            }
        }
        Instance::Prop2 { n, e } => {
            let inv = inverse(&l2_matrix(*n, e))?;
            let tol = PROP2_TOL * inv.max_abs().max(1.0);
            if is_l2_matrix(&inv, tol) {
                Ok(Outcome::Pass)
            } else {
                fail(format!(
                    "inverse of an L2 matrix (n = {n}) breaks the pattern"
                ))
            }
        }
        Instance::Lemma1 { x, y, k, network } => {
            let net = network.clone().into_network()?;
            let p = NopaParams::normalized(*x, *y, *k, REFERENCE_RATE_HZ)?;
            let ss = match build_closed_loop(&p, &net) {
                Ok(ss) => ss,
                Err(Error::IllPosed(reason)) => return Ok(Outcome::Vacuous { reason }),
                Err(e) => return Err(e),
            };
            let stab = ss.stability()?;
            if !stab.stable {
                return Ok(Outcome::Vacuous {
                    reason: format!("unstable (abscissa {:e})", stab.abscissa),
                });
            }
            let coeffs = StaticCoefficients::from_params(&p)?;
            let lu = Lu::new(&loop_matrix(&coeffs, &net))?;
            if lu.is_singular() {
                fail(format!(
                    "stable system with singular loop matrix (|det| ~ {:e})",
                    lu.log_abs_det().exp()
                ))
            } else {
                Ok(Outcome::Pass)
            }
        }
        Instance::Symplectic { dim, entries } => {
            let data = entries
                .iter()
                .map(|&[re, im]| Complex64::new(re, im))
                .collect();
            let s = ComplexMatrix::from_vec(*dim, *dim, data)?;
            check_unitary(&s, NETWORK_TOL)?;
            let (orth, sympl) = quadrature_defects(&to_quadrature(&s)?);
            if orth < SYMPLECTIC_TOL && sympl < SYMPLECTIC_TOL {
                Ok(Outcome::Pass)
            } else {
                fail(format!(
                    "quadrature form defects: orthogonality {orth:e}, symplecticity {sympl:e}"
                ))
            }
        }
        Instance::ThreePath { n_nopas, x, y } => {
            let p = NopaParams::lossless(*x, *y)?;
            let net = PassiveNetwork::cfb(*n_nopas)?;
            let stab = build_closed_loop(&p, &net)?.stability()?;
            if !stab.stable {
                return Ok(Outcome::Vacuous {
                    reason: format!("unstable (abscissa {:e})", stab.abscissa),
                });
            }
            let coeffs = StaticCoefficients::from_params(&p)?;
            let closed = closed_form(&coeffs, *n_nopas)?;
            let dets = determinant_path(&coeffs, *n_nopas)?;
            let matrix = extract_uv(&static_transfer(&coeffs, &net)?)?;
            let (du, dv) = dets.uv();
            let gap = [
                rel_gap(closed.u, matrix.u),
                rel_gap(closed.v, matrix.v),
                rel_gap(du, matrix.u),
                rel_gap(dv, matrix.v),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            if gap < THREE_PATH_TOL {
                Ok(Outcome::Pass)
            } else {
                fail(format!("u/v paths disagree (relative gap {gap:e})"))
            }
        }
        Instance::Omega0 { n_nopas, x, y, k } => {
            let p = NopaParams::normalized(*x, *y, *k, REFERENCE_RATE_HZ)?;
            let net = PassiveNetwork::cfb(*n_nopas)?;
            let ss = build_closed_loop(&p, &net)?;
            let stab = ss.stability()?;
            if !stab.stable {
                return Ok(Outcome::Vacuous {
                    reason: format!("unstable (abscissa {:e})", stab.abscissa),
                });
            }
            let dynamic = ss.transfer(0.0)?;
            let stat = static_transfer(&StaticCoefficients::from_params(&p)?, &net)?;
            let gap = dynamic.max_abs_diff(&stat.h_n.to_complex());
            if gap < OMEGA0_TOL {
                Ok(Outcome::Pass)
            } else {
                fail(format!("H(0) differs from the static transfer by {gap:e}"))
            }
        }
    }
}

/// `|a - b| / max(1, |b|)`.
pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn l2_scalars(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..2 * n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Scalars are laid out row-major over `0 <= i < 2n`, `0 <= j < n`.
fn l2_matrix(n: usize, scalars: &[f64]) -> RealMatrix {
    l2_from_scalars(n, |i, j| scalars[i * n + j])
}

/// 1-norm condition number, `None` when singular.
pub fn condition_number(m: &RealMatrix) -> Option<f64> {
    let inv = inverse(m).ok()?;
    Some(one_norm(m) * one_norm(&inv))
}

fn one_norm(m: &RealMatrix) -> f64 {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Unitary from modified Gram-Schmidt on a matrix with uniform complex entries.
pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    loop {
        let mut cols: Vec<Vec<Complex64>> = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let mut ok = true;
        for j in 0..dim {
            // Two sweeps keep the columns orthogonal to rounding.
            for _ in 0..2 {
                for i in 0..j {
                    let proj: Complex64 = (0..dim).map(|r| cols[i][r].conj() * cols[j][r]).sum();
                    for r in 0..dim {
                        let qi = cols[i][r];
                        cols[j][r] -= proj * qi;
                    }
                }
            }
            let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for z in cols[j].iter_mut() {
                *z /= norm;
            }
        }
        if ok {
            return ComplexMatrix::from_fn(dim, dim, |r, c| cols[c][r]);
        }
    }
}

fn network_file(n_nopas: usize, s: &ComplexMatrix) -> NetworkFile {
    NetworkFile {
        n_nopas,
        entries: s.as_slice().iter().map(|z| [z.re, z.im]).collect(),
    }
}
