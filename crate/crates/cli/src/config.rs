//! Experiment configuration files (TOML).
//!
//! A `meta.json` written by a previous run is accepted as well; its embedded
//! `config` object is re-read through the same TOML path so validation and
//! error messages are identical.

use std::fmt;
use std::path::Path;

use lindblad_extrap::grids::GridKind;
use lindblad_extrap::sampling::ShotMode;
use lindblad_extrap::zoo::TfimParams;
use lindblad_extrap::{ExtrapolationMethod, IntegratorKind};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use toml::Spanned;

/// A configuration problem, located in the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{}:{}: {}", self.source_name, l, c, self.message),
            (Some(l), None) => write!(f, "{}:{}: {}", self.source_name, l, self.message),
            _ => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn at(source_name: &str, src: &str, offset: Option<usize>, message: String) -> Self {
        let (line, column) = match offset {
            Some(off) => {
                let off = off.min(src.len());
                let before = &src[..off];
                let line = before.matches('\n').count() + 1;
                let column = off - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
                (Some(line), Some(column))
            }
            None => (None, None),
        };
        Self {
            source_name: source_name.to_string(),
            line,
            column,
            message,
        }
    }

    pub fn plain(message: impl Into<String>) -> Self {
        Self {
            source_name: "config".into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

/// Strictly positive finite real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Positive(pub f64);

impl<'de> Deserialize<'de> for Positive {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if v > 0.0 && v.is_finite() {
            Ok(Positive(v))
        } else {
            Err(de::Error::custom(format!("expected a positive number, got {v}")))
        }
    }
}

/// Integer >= 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AtLeastOne(pub u64);

impl<'de> Deserialize<'de> for AtLeastOne {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u64::deserialize(d)?;
        if v >= 1 {
            Ok(AtLeastOne(v))
        } else {
            Err(de::Error::custom("expected an integer >= 1, got 0"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    /// Only meaningful for zoo = "random"; "random16" fixes it to 16.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "one_usize")]
    pub n_jumps: usize,
    pub seed: u64,
    #[serde(default = "unit_scale")]
    pub scale: Positive,
    /// Seed of the random initial pure state; defaults to the model seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_seed: Option<u64>,
}

fn one_usize() -> usize {
    1
}

fn unit_scale() -> Positive {
    Positive(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfimSpec {
    #[serde(default = "default_n_q")]
    pub n_q: usize,
    #[serde(default = "tfim_default_omega")]
    pub omega: f64,
    #[serde(default = "tfim_default_omega_r")]
    pub omega_r: f64,
    #[serde(default = "tfim_default_coupling")]
    pub coupling_j: f64,
    #[serde(default = "tfim_default_gamma")]
    pub gamma: f64,
}

fn default_n_q() -> usize {
    TfimParams::default().n_q
}
fn tfim_default_omega() -> f64 {
    TfimParams::default().omega
}
fn tfim_default_omega_r() -> f64 {
    TfimParams::default().omega_r
}
fn tfim_default_coupling() -> f64 {
    TfimParams::default().coupling_j
}
fn tfim_default_gamma() -> f64 {
    TfimParams::default().gamma
}

impl From<&TfimSpec> for TfimParams {
    fn from(s: &TfimSpec) -> Self {
        TfimParams {
            n_q: s.n_q,
            omega: s.omega,
            omega_r: s.omega_r,
            coupling_j: s.coupling_j,
            gamma: s.gamma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "zoo")]
pub enum ModelSpec {
    #[serde(rename = "random16")]
    Random16(RandomSpec),
    #[serde(rename = "random")]
    Random(RandomSpec),
    #[serde(rename = "tfim")]
    Tfim(TfimSpec),
}

/// Right endpoint of the step-size interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Interval {
    Auto,
    Fixed(f64),
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Interval::Auto => s.serialize_str("auto"),
            Interval::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v > 0.0 && v.is_finite() => Ok(Interval::Fixed(v)),
            Raw::Num(v) => Err(de::Error::custom(format!("interval must be positive, got {v}"))),
            Raw::Text(s) if s == "auto" => Ok(Interval::Auto),
            Raw::Text(s) => Err(de::Error::custom(format!("interval must be a number or \"auto\", got \"{s}\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub kind: GridKind,
    /// Polynomial degree; the grid has n + 1 nodes.
    pub n: AtLeastOne,
    pub interval: Spanned<Interval>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[serde(alias = "richardson")]
    Interpolation,
    Regression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolationSpec {
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<Spanned<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotSpec {
    pub n_shots: AtLeastOne,
    pub seed: u64,
    #[serde(default)]
    pub mode: ShotMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn default_reference_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub integrator: IntegratorKind,
    pub total_time: Positive,
    /// Evolve the generator scaled by `total_time` for unit time.
    #[serde(default)]
    pub rescale: bool,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub extrapolation: ExtrapolationSpec,
    pub shots: ShotSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str, source_name: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
            ConfigError::at(source_name, src, e.span().map(|s| s.start), e.message().trim().to_string())
        })?;
        cfg.validate(src, source_name)?;
        Ok(cfg)
    }

    /// Reads a `.toml` config, or a `.json` file holding either a config or
    /// a previous run's `meta.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let src = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at(&name, "", None, format!("cannot read config: {e}")))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&src)
                .map_err(|e| ConfigError::at(&name, "", None, format!("line {}: {e}", e.line())))?;
            let cfg = v.get("config").cloned().unwrap_or(v);
            let text = toml::to_string(&cfg)
                .map_err(|e| ConfigError::at(&name, "", None, format!("config object is not representable: {e}")))?;
            Self::from_toml_str(&text, &format!("{name} (config)"))
        } else {
            Self::from_toml_str(&src, &name)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, src: &str, source_name: &str) -> Result<(), ConfigError> {
        let nodes = self.grid.n.0 as usize + 1;
        match (self.extrapolation.method, &self.extrapolation.degree) {
            (MethodName::Regression, None) => {
                return Err(ConfigError::plain("regression needs extrapolation.degree").with_source(source_name))
            }
            (MethodName::Regression, Some(d)) if *d.get_ref() + 1 > nodes => {
                return Err(ConfigError::at(
                    source_name,
                    src,
                    Some(d.span().start),
                    format!("regression degree {} needs at least {} nodes, the grid has {nodes}", d.get_ref(), d.get_ref() + 1),
                ));
            }
            (MethodName::Regression, Some(d)) if *d.get_ref() + 1 == nodes => {
                return Err(ConfigError::at(
                    source_name,
                    src,
                    Some(d.span().start),
                    format!(
                        "regression degree {} must be below the node count {nodes}; use method = \"interpolation\"",
                        d.get_ref()
                    ),
                ));
            }
            (MethodName::Interpolation, Some(d)) if *d.get_ref() != nodes - 1 => {
                return Err(ConfigError::at(
                    source_name,
                    src,
                    Some(d.span().start),
                    format!("interpolation on {nodes} nodes has degree {}, got {}", nodes - 1, d.get_ref()),
                ));
            }
            _ => {}
        }
        if !(self.reference_tol > 0.0 && self.reference_tol.is_finite()) {
            return Err(ConfigError::plain(format!("reference_tol must be positive, got {}", self.reference_tol))
                .with_source(source_name));
        }
        match &self.model {
            ModelSpec::Random16(r) if r.dim.is_some_and(|d| d != 16) => {
                return Err(ConfigError::plain("zoo \"random16\" has dim 16; use zoo = \"random\" for other sizes")
                    .with_source(source_name))
            }
            ModelSpec::Random(r) if r.dim.is_none() => {
                return Err(ConfigError::plain("zoo \"random\" needs model.dim").with_source(source_name))
            }
            ModelSpec::Tfim(t) if t.n_q == 0 || t.n_q > 6 => {
                return Err(ConfigError::plain(format!("tfim n_q must be in 1..=6, got {}", t.n_q))
                    .with_source(source_name))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn method(&self) -> ExtrapolationMethod {
        match self.extrapolation.method {
            MethodName::Interpolation => ExtrapolationMethod::Interpolation,
            MethodName::Regression => ExtrapolationMethod::Regression {
                degree: *self.extrapolation.degree.as_ref().expect("validated").get_ref(),
            },
        }
    }

    pub fn interval(&self) -> Interval {
        *self.grid.interval.get_ref()
    }

    pub fn set_interval(&mut self, v: f64) {
        self.grid.interval = Spanned::new(0..0, Interval::Fixed(v));
    }
}

impl ConfigError {
    fn with_source(mut self, name: &str) -> Self {
        self.source_name = name.to_string();
        self
    }
}
