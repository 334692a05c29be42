//! The five subcommands. Each returns rendered text plus an exit code;
//! the caller decides where the text goes.

use std::path::PathBuf;

use nopa_core::closed_form::{
    closed_form, determinant_path, optimal_thetas, ClosedFormResult, ThetaClass,
};
use nopa_core::dynamics::{build_closed_loop, StateSpace};
use nopa_core::entanglement::{squeezing_spectrum, vanishing_search, DEFAULT_SEARCH_GRID};
use nopa_core::network::{NopaParams, PassiveNetwork};
use nopa_core::static_limit::{extract_uv, static_transfer, StaticCoefficients};
use nopa_core::verify::{self, FailureRecord, Fault, Outcome, Suite, VerifyReport};
use serde::{Deserialize, Serialize};

use crate::config::{CompareSpec, ExperimentConfig, Format, Preset, Topology};
use crate::error::{CliError, Result, EXIT_OK, EXIT_UNSTABLE, EXIT_VERIFY};
use crate::output::{json, num, opt_num, Csv};

/// Everything a command needs besides the config file.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub preset: Option<Preset>,
    pub inject_fault: bool,
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub code: i32,
    /// Diagnostics for stderr; never part of the deterministic output.
    pub notes: Vec<String>,
}

impl CommandOutput {
    fn ok(text: String) -> Self {
        Self {
            text,
            code: EXIT_OK,
            notes: Vec::new(),
        }
    }
}

fn format(cfg: &ExperimentConfig, opts: &Options, default: Format) -> Format {
    opts.format
        .or(cfg.output.as_ref().and_then(|o| o.format))
        .unwrap_or(default)
}

fn system(cfg: &ExperimentConfig) -> Result<(NopaParams, PassiveNetwork, StateSpace)> {
    let params = cfg.params()?;
    let net = cfg.network()?;
    let ss = build_closed_loop(&params, &net)?;
    Ok((params, net, ss))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Eigenvalue {
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize)]
struct StabilityReport {
    n_nopas: usize,
    stable: bool,
    abscissa: f64,
    eigenvalues: Vec<Eigenvalue>,
}

pub fn stability(cfg: &ExperimentConfig, opts: &Options) -> Result<CommandOutput> {
    let (_, net, ss) = system(cfg)?;
    let stab = ss.stability()?;
    let report = StabilityReport {
        n_nopas: net.n_nopas(),
        stable: stab.stable,
        abscissa: stab.abscissa,
        eigenvalues: stab
            .spectrum
            .iter()
            .map(|z| Eigenvalue { re: z.re, im: z.im })
            .collect(),
    };
    let text = match format(cfg, opts, Format::Json) {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut csv = Csv::new(&["stable", "abscissa", "index", "re", "im"]);
            for (i, z) in report.eigenvalues.iter().enumerate() {
                csv.row([
                    report.stable.to_string(),
                    num(report.abscissa),
                    i.to_string(),
                    num(z.re),
                    num(z.im),
                ]);
            }
            csv.finish()
        }
    };
    let mut out = CommandOutput::ok(text);
    if !report.stable {
        out.code = EXIT_UNSTABLE;
        out.notes.push(format!(
            "system is unstable (spectral abscissa {:e})",
            report.abscissa
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaSource {
    Config,
    ClosedForm,
    Search,
}

/// Resolves the output phases; "optimal" means optimal at `omega = 0`.
pub fn resolve_thetas(
    cfg: &ExperimentConfig,
    params: &NopaParams,
    ss: &StateSpace,
) -> Result<(f64, f64, ThetaSource)> {
    match (cfg.theta_a.value(), cfg.theta_b.value()) {
        (Some(a), Some(b)) => return Ok((a, b, ThetaSource::Config)),
        (None, None) => {}
        _ => {
            return Err(CliError::Config(
                "theta_a and theta_b must both be \"optimal\" or both be numbers".into(),
            ))
        }
    }
    let n = ss.n_nopas;
    if cfg.topology == Topology::Cfb && params.is_lossless() && n >= 2 {
        let coeffs = StaticCoefficients::from_params(params)?;
        if let Ok(result) = closed_form(&coeffs, n) {
            let (a, b) = optimal_thetas(&result)[0];
            return Ok((a, b, ThetaSource::ClosedForm));
        }
    }
    let found = vanishing_search(&ss.transfer(0.0)?, DEFAULT_SEARCH_GRID)?;
    Ok((found.psi_1, found.psi_2, ThetaSource::Search))
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    omega_rad_s: f64,
    v_plus: f64,
    v_minus: f64,
    v_total: f64,
    entangled: bool,
}

#[derive(Debug, Serialize)]
struct SpectrumReport {
    n_nopas: usize,
    theta_a: f64,
    theta_b: f64,
    theta_source: ThetaSource,
    rows: Vec<SpectrumRow>,
}

pub fn spectrum(cfg: &ExperimentConfig, opts: &Options) -> Result<CommandOutput> {
    let (params, net, ss) = system(cfg)?;
    let omegas = cfg
        .omega_grid
        .as_ref()
        .ok_or_else(|| CliError::Config("spectrum needs an omega_grid".into()))?
        .to_rad_s()?;
    let stab = ss.stability()?;
    if !stab.stable {
        return Err(nopa_core::Error::Unstable {
            abscissa: stab.abscissa,
        }
        .into());
    }
    let (theta_a, theta_b, theta_source) = resolve_thetas(cfg, &params, &ss)?;
    let rows: Vec<SpectrumRow> = squeezing_spectrum(&ss, &omegas, theta_a, theta_b)?
        .into_iter()
        .map(|r| SpectrumRow {
            omega_rad_s: r.omega.unwrap_or(0.0),
            v_plus: r.v_plus,
            v_minus: r.v_minus,
            v_total: r.v_total,
            entangled: r.entangled,
        })
        .collect();
    let report = SpectrumReport {
        n_nopas: net.n_nopas(),
        theta_a,
        theta_b,
        theta_source,
        rows,
    };
    let text = match format(cfg, opts, Format::Csv) {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut csv = Csv::new(&["omega_rad_s", "v_plus", "v_minus", "v_total", "entangled"]);
            for r in &report.rows {
                csv.row([
                    num(r.omega_rad_s),
                    num(r.v_plus),
                    num(r.v_minus),
                    num(r.v_total),
                    r.entangled.to_string(),
                ]);
            }
            csv.finish()
        }
    };
    Ok(CommandOutput::ok(text))
}

#[derive(Debug, Serialize)]
pub struct TheoremReport {
    pub n_nopas: usize,
    pub stable: bool,
    pub u: f64,
    pub v: f64,
    pub upsilon: f64,
    pub theorem_upsilon: f64,
    pub product_sign: f64,
    pub theta_class: ThetaClass,
    pub theta_a: f64,
    pub theta_b: f64,
    pub v_opt: f64,
    pub v_opt_db: f64,
    pub matrix_u: f64,
    pub matrix_v: f64,
    pub u_discrepancy: f64,
    pub v_discrepancy: f64,
    pub determinant_u: Option<f64>,
    pub determinant_v: Option<f64>,
    pub determinant_error: Option<String>,
}

pub fn theorem_report(cfg: &ExperimentConfig) -> Result<TheoremReport> {
    if cfg.topology != Topology::Cfb {
        return Err(nopa_core::Error::Unsupported(
            "the closed form covers the CFB chain only; use `spectrum` for custom networks".into(),
        )
        .into());
    }
    let (params, net, ss) = system(cfg)?;
    if !params.is_lossless() {
        return Err(nopa_core::Error::Unsupported(
            "the closed form needs kappa = 0; use `spectrum` for lossy amplifiers".into(),
        )
        .into());
    }
    let n = net.n_nopas();
    let coeffs = StaticCoefficients::from_params(&params)?;
    let cf: ClosedFormResult = closed_form(&coeffs, n)?;
    let matrix = extract_uv(&static_transfer(&coeffs, &net)?)?;
    let (determinant_u, determinant_v, determinant_error) = match determinant_path(&coeffs, n) {
        Ok(path) => {
            let (u, v) = path.uv();
            (Some(u), Some(v), None)
        }
        Err(e) => (None, None, Some(e.to_string())),
    };
    let (theta_a, theta_b) = optimal_thetas(&cf)[0];
    Ok(TheoremReport {
        n_nopas: n,
        stable: ss.stability()?.stable,
        u: cf.u,
        v: cf.v,
        upsilon: cf.upsilon,
        theorem_upsilon: cf.theorem_upsilon,
        product_sign: cf.product_sign,
        theta_class: cf.theta_class,
        theta_a,
        theta_b,
        v_opt: cf.v_opt,
        v_opt_db: cf.v_opt_db(),
        matrix_u: matrix.u,
        matrix_v: matrix.v,
        u_discrepancy: (cf.u - matrix.u).abs(),
        v_discrepancy: (cf.v - matrix.v).abs(),
        determinant_u,
        determinant_v,
        determinant_error,
    })
}

pub fn theorem(cfg: &ExperimentConfig, opts: &Options) -> Result<CommandOutput> {
    let r = theorem_report(cfg)?;
    let text = match format(cfg, opts, Format::Json) {
        Format::Json => json(&r)?,
        Format::Csv => {
            let mut csv = Csv::new(&[
                "n",
                "stable",
                "u",
                "v",
                "upsilon",
                "theorem_upsilon",
                "product_sign",
                "theta_class",
                "theta_a",
                "theta_b",
                "v_opt",
                "v_opt_db",
                "matrix_u",
                "matrix_v",
                "u_discrepancy",
                "v_discrepancy",
                "determinant_u",
                "determinant_v",
            ]);
            csv.row([
                r.n_nopas.to_string(),
                r.stable.to_string(),
                num(r.u),
                num(r.v),
                num(r.upsilon),
                num(r.theorem_upsilon),
                num(r.product_sign),
                r.theta_class.as_str().to_string(),
                num(r.theta_a),
                num(r.theta_b),
                num(r.v_opt),
                num(r.v_opt_db),
                num(r.matrix_u),
                num(r.matrix_v),
                num(r.u_discrepancy),
                num(r.v_discrepancy),
                opt_num(r.determinant_u),
                opt_num(r.determinant_v),
            ]);
            csv.finish()
        }
    };
    let mut out = CommandOutput::ok(text);
    if let Some(e) = &r.determinant_error {
        out.notes.push(format!("determinant path: {e}"));
    }
    if !r.stable {
        out.code = EXIT_UNSTABLE;
        out.notes
            .push("system is unstable; the static values are not physical".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub n: usize,
    pub x_n: f64,
    pub stable: bool,
    pub abscissa: f64,
    pub v_opt: Option<f64>,
    pub v_opt_db: Option<f64>,
}

/// Equal-power sweep `x_n = sqrt(n_ref / n) x_ref`; unstable rows are kept and flagged.
pub fn compare_rows(spec: &CompareSpec) -> Result<Vec<CompareRow>> {
    (spec.n_min..=spec.n_max)
        .map(|n| {
            let x_n = (spec.n_ref as f64 / n as f64).sqrt() * spec.x_ref;
            let params = NopaParams::lossless(x_n, spec.y)?;
            let net = PassiveNetwork::cfb(n)?;
            let stab = build_closed_loop(&params, &net)?.stability()?;
            let cf = StaticCoefficients::new(x_n, spec.y, 0.0).and_then(|c| closed_form(&c, n));
            let (v_opt, v_opt_db) = match cf {
                Ok(r) => (Some(r.v_opt), Some(r.v_opt_db())),
                Err(_) => (None, None),
            };
            Ok(CompareRow {
                n,
                x_n,
                stable: stab.stable,
                abscissa: stab.abscissa,
                v_opt,
                v_opt_db,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct CompareReport {
    n_ref: usize,
    x_ref: f64,
    y: f64,
    rows: Vec<CompareRow>,
}

pub fn compare(cfg: &ExperimentConfig, opts: &Options) -> Result<CommandOutput> {
    let spec = match (opts.preset, &cfg.compare) {
        (Some(p), None) => CompareSpec::preset(p),
        (Some(p), Some(c)) => {
            let mut c = *c;
            c.preset = Some(p);
            c.resolve()?
        }
        (None, Some(c)) => c.resolve()?,
        (None, None) => CompareSpec::preset(Preset::Text),
    };
    let rows = compare_rows(&spec)?;
    let unstable: Vec<usize> = rows.iter().filter(|r| !r.stable).map(|r| r.n).collect();
    let report = CompareReport {
        n_ref: spec.n_ref,
        x_ref: spec.x_ref,
        y: spec.y,
        rows,
    };
    let text = match format(cfg, opts, Format::Csv) {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut csv = Csv::new(&["n", "x_n", "v_opt", "v_opt_db", "stable"]);
            for r in &report.rows {
                csv.row([
                    r.n.to_string(),
                    num(r.x_n),
                    opt_num(r.v_opt),
                    opt_num(r.v_opt_db),
                    r.stable.to_string(),
                ]);
            }
            csv.finish()
        }
    };
    let mut out = CommandOutput::ok(text);
    if !unstable.is_empty() {
        out.code = EXIT_UNSTABLE;
        out.notes
            .push(format!("unstable instances flagged for n = {unstable:?}"));
    }
    Ok(out)
}

/// A replay file holds one failure record or a whole report.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ReplayFile {
    Record(FailureRecord),
    Report(VerifyReport),
}

#[derive(Debug, Serialize)]
struct ReplayResult {
    seed: u64,
    trial: usize,
    suite: Suite,
    recorded: String,
    outcome: Outcome,
    reproduced: bool,
}

fn replay(path: &PathBuf, cfg: &ExperimentConfig, opts: &Options) -> Result<CommandOutput> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e,
    })?;
    let records = match serde_json::from_str::<ReplayFile>(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    {
        ReplayFile::Record(r) => vec![r],
        ReplayFile::Report(r) => r.suites.into_iter().flat_map(|s| s.failures).collect(),
    };
    if records.is_empty() {
        return Err(CliError::Config(format!(
            "{} contains no failure records",
            path.display()
        )));
    }
    let results: Vec<ReplayResult> = records
        .into_iter()
        .map(|rec| {
            let outcome = verify::replay(&rec);
            let reproduced =
                matches!(&outcome, Outcome::Fail { message } if *message == rec.message);
            ReplayResult {
                seed: rec.seed,
                trial: rec.trial,
                suite: rec.instance.suite(),
                recorded: rec.message,
                outcome,
                reproduced,
            }
        })
        .collect();
    let any_failed = results
        .iter()
        .any(|r| matches!(r.outcome, Outcome::Fail { .. }));
    let text = match format(cfg, opts, Format::Json) {
        Format::Json => json(&results)?,
        Format::Csv => {
            let mut csv = Csv::new(&["suite", "seed", "trial", "status", "reproduced"]);
            for r in &results {
                let status = match r.outcome {
                    Outcome::Pass => "pass",
                    Outcome::Vacuous { .. } => "vacuous",
                    Outcome::Fail { .. } => "fail",
                };
                csv.row([
                    suite_name(r.suite),
                    r.seed.to_string(),
                    r.trial.to_string(),
                    status.to_string(),
                    r.reproduced.to_string(),
                ]);
            }
            csv.finish()
        }
    };
    let mut out = CommandOutput::ok(text);
    if any_failed {
        out.code = EXIT_VERIFY;
        out.notes.push("replayed instance still fails".into());
    }
    Ok(out)
}

fn suite_name(s: Suite) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn verify_config(cfg: &ExperimentConfig, opts: &Options) -> verify::VerifyConfig {
    let section = cfg.verify.clone().unwrap_or_default();
    let mut vc = verify::VerifyConfig::default();
    vc.seed = opts.seed.or(section.seed).unwrap_or(vc.seed);
    vc.trials = opts.trials.or(section.trials).unwrap_or(vc.trials);
    if let Some(suites) = section.suites {
        vc.suites = suites;
    }
    vc.fault = if opts.inject_fault {
        Some(section.inject_fault.unwrap_or_default())
    } else {
        section.inject_fault
    };
    vc
}

pub fn verify(cfg: &ExperimentConfig, opts: &Options) -> Result<CommandOutput> {
    if let Some(path) = &opts.replay {
        return replay(path, cfg, opts);
    }
    let vc = verify_config(cfg, opts);
    if let Some(Fault { row, col, .. }) = vc.fault {
        if !vc.suites.contains(&Suite::Symplectic) {
            return Err(CliError::Usage(format!(
                "fault ({row}, {col}) only applies to the symplectic suite, which is not selected"
            )));
        }
    }
    let report = verify::run(&vc);
    let text = match format(cfg, opts, Format::Json) {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut csv = Csv::new(&["suite", "trials", "passed", "vacuous", "failed"]);
            for s in &report.suites {
                csv.row([
                    suite_name(s.suite),
                    s.trials.to_string(),
                    s.passed.to_string(),
                    s.vacuous.to_string(),
                    s.failed.to_string(),
                ]);
            }
            csv.finish()
        }
    };
    let mut out = CommandOutput::ok(text);
    if !report.all_passed() {
        out.code = EXIT_VERIFY;
        out.notes.push(format!(
            "{} failing trial(s); the JSON report lists every failing instance and can be passed to --replay",
            report.total_failed()
        ));
        if let Some(first) = report.suites.iter().flat_map(|s| &s.failures).next() {
            out.notes.push(format!(
                "first failure:\n{}",
                serde_json::to_string_pretty(first).unwrap_or_default()
            ));
        }
    }
    Ok(out)
}
