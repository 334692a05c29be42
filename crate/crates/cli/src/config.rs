//! JSON experiment configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nopa_core::network::{
    default_loss_proportionality, NopaParams, PassiveNetwork, REFERENCE_RATE_HZ,
};
use nopa_core::verify::{Fault, Suite};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub topology: Topology,
    /// Path of a custom interconnect, relative to the config file.
    pub matrix: Option<PathBuf>,
    pub n_nopas: Option<usize>,
    pub params: Option<ParamsConfig>,
    pub omega_grid: Option<OmegaGrid>,
    #[serde(default)]
    pub theta_a: Theta,
    #[serde(default)]
    pub theta_b: Theta,
    pub output: Option<OutputConfig>,
    pub compare: Option<CompareConfig>,
    pub verify: Option<VerifyConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Cfb,
    Custom,
}

/// Exactly one of the two parameter styles.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamsConfig {
    Normalized(NormalizedStyle),
    Physical(PhysicalStyle),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizedStyle {
    pub x: f64,
    #[serde(default = "one")]
    pub y: f64,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub gamma_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalStyle {
    pub epsilon: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub gamma_r: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ParamsConfig {
    pub fn to_params(&self) -> Result<NopaParams> {
        let p = match *self {
            ParamsConfig::Normalized(n) => {
                let gamma_r = n.gamma_r.unwrap_or(REFERENCE_RATE_HZ);
                let k = n.k.unwrap_or_else(|| default_loss_proportionality(gamma_r));
                NopaParams::normalized(n.x, n.y, k, gamma_r)
            }
            ParamsConfig::Physical(p) => NopaParams::new(p.epsilon, p.gamma, p.kappa),
        };
        p.map_err(|e| CliError::Config(format!("params: {e}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    Hz,
    #[default]
    RadS,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OmegaGrid {
    Values {
        #[serde(default)]
        unit: FrequencyUnit,
        values: Vec<f64>,
    },
    Range {
        #[serde(default)]
        unit: FrequencyUnit,
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        scale: GridScale,
    },
}

impl OmegaGrid {
    /// Grid points in rad/s, checked to be finite, non-negative and strictly increasing.
    pub fn to_rad_s(&self) -> Result<Vec<f64>> {
        let (unit, raw) = match self {
            OmegaGrid::Values { unit, values } => (*unit, values.clone()),
            OmegaGrid::Range {
                unit,
                start,
                stop,
                points,
                scale,
            } => (*unit, range(*start, *stop, *points, *scale)?),
        };
        let factor = match unit {
            FrequencyUnit::Hz => 2.0 * PI,
            FrequencyUnit::RadS => 1.0,
        };
        if raw.is_empty() {
            return Err(CliError::Config("omega_grid is empty".into()));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CliError::Config(
                "omega_grid values must be finite and >= 0".into(),
            ));
        }
        if raw.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "omega_grid must be strictly increasing".into(),
            ));
        }
        Ok(raw.into_iter().map(|w| w * factor).collect())
    }
}

fn range(start: f64, stop: f64, points: usize, scale: GridScale) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(CliError::Config("omega_grid.points must be >= 1".into()));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let steps = (points - 1) as f64;
    Ok(match scale {
        GridScale::Linear => (0..points)
            .map(|i| start + (stop - start) * i as f64 / steps)
            .collect(),
        GridScale::Log => {
            if !(start > 0.0 && stop > 0.0) {
                return Err(CliError::Config(
                    "a log omega_grid needs start > 0 and stop > 0".into(),
                ));
            }
            let (a, b) = (start.ln(), stop.ln());
            (0..points)
                .map(|i| (a + (b - a) * i as f64 / steps).exp())
                .collect()
        }
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Theta {
    #[default]
    #[serde(skip)]
    Zero,
    Value(f64),
    Named(ThetaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaName {
    Optimal,
}

impl Theta {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Theta::Named(ThetaName::Optimal))
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Theta::Zero => Some(0.0),
            Theta::Value(v) => Some(v),
            Theta::Named(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}', expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Equal-power comparison across chain lengths.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub preset: Option<Preset>,
    pub n_ref: Option<usize>,
    pub x_ref: Option<f64>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub y: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Preset {
    /// `x_10 = 0.078`, just inside the stability region at N = 10.
    #[serde(rename = "x10-0.078")]
    Text,
    /// `x_10 = 0.13`; unstable for n >= 4.
    #[serde(rename = "x10-0.13")]
    Caption,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "x10-0.078" => Ok(Preset::Text),
            "x10-0.13" => Ok(Preset::Caption),
            other => Err(format!(
                "unknown preset '{other}', expected x10-0.078 or x10-0.13"
            )),
        }
    }
}

impl Preset {
    pub fn x_ref(self) -> f64 {
        match self {
            Preset::Text => 0.078,
            Preset::Caption => 0.13,
        }
    }
}

/// Fully resolved comparison sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSpec {
    pub n_ref: usize,
    pub x_ref: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub y: f64,
}

impl CompareSpec {
    pub fn preset(p: Preset) -> Self {
        Self {
            n_ref: 10,
            x_ref: p.x_ref(),
            n_min: 2,
            n_max: 10,
            y: 1.0,
        }
    }
}

impl CompareConfig {
    pub fn resolve(&self) -> Result<CompareSpec> {
        let base = CompareSpec::preset(self.preset.unwrap_or(Preset::Text));
        let n_ref = self.n_ref.unwrap_or(base.n_ref);
        let spec = CompareSpec {
            n_ref,
            x_ref: self.x_ref.unwrap_or(base.x_ref),
            n_min: self.n_min.unwrap_or(2),
            n_max: self.n_max.unwrap_or(n_ref),
            y: self.y.unwrap_or(1.0),
        };
        if spec.n_min < 2 || spec.n_max < spec.n_min || spec.n_ref == 0 {
            return Err(CliError::Config(format!(
                "compare needs 2 <= n_min <= n_max and n_ref >= 1, got n_min = {}, n_max = {}, n_ref = {}",
                spec.n_min, spec.n_max, spec.n_ref
            )));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub suites: Option<Vec<Suite>>,
    pub inject_fault: Option<Fault>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn require_n(&self) -> Result<usize> {
        self.n_nopas
            .ok_or_else(|| CliError::Config("n_nopas is required".into()))
    }

    pub fn params(&self) -> Result<NopaParams> {
        self.params
            .as_ref()
            .ok_or_else(|| CliError::Config("params is required".into()))?
            .to_params()
    }

    pub fn network(&self) -> Result<PassiveNetwork> {
        let n = self.require_n()?;
        match self.topology {
            Topology::Cfb => {
                if self.matrix.is_some() {
                    return Err(CliError::Config(
                        "matrix is only allowed with topology \"custom\"".into(),
                    ));
                }
                PassiveNetwork::cfb(n).map_err(|e| CliError::Config(e.to_string()))
            }
            Topology::Custom => {
                let rel = self.matrix.as_ref().ok_or_else(|| {
                    CliError::Config("topology \"custom\" needs a matrix path".into())
                })?;
                let path = self.base_dir.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let net = PassiveNetwork::from_json_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if net.n_nopas() != n {
                    return Err(CliError::Config(format!(
                        "n_nopas = {n} but {} describes {} NOPAs",
                        path.display(),
                        net.n_nopas()
                    )));
                }
                Ok(net)
            }
        }
    }
}
