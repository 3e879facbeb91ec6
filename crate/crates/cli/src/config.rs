use std::path::PathBuf;

use halfspace::geometry::{ModelParams, Wall};
use halfspace::montecarlo::{Cell, PathConfig};
use halfspace::quad::QuadSpec;
use serde::{Deserialize, Serialize};

/// What a run does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Eval,
    Table,
    Verify,
    Simulate,
    PdeCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Table => "table",
            Command::Verify => "verify",
            Command::Simulate => "simulate",
            Command::PdeCheck => "pde-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelName {
    Transition,
    Killed,
    Potential,
    Green,
    GlobalPoisson,
    Poisson,
    LambdaPoisson,
    WallLimit,
}

impl KernelName {
    pub fn name(self) -> &'static str {
        match self {
            KernelName::Transition => "transition",
            KernelName::Killed => "killed",
            KernelName::Potential => "potential",
            KernelName::Green => "green",
            KernelName::GlobalPoisson => "global-poisson",
            KernelName::Poisson => "poisson",
            KernelName::LambdaPoisson => "lambda-poisson",
            KernelName::WallLimit => "wall-limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitName {
    Wall1,
    Wall2,
    Infinity,
    Diagonal,
}

/// One kernel value `k(x, y)`, or `k(t, x, y)` for the time-dependent ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub kernel: KernelName,
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Wall of `y` for the Poisson kernels; inferred from a zero coordinate if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<Wall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitName>,
}

/// Quantity swept by `table`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    #[serde(flatten)]
    pub base: PointSpec,
    /// `t`, `x<k>` or `y<k>` (coordinates counted from 1).
    pub vary: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Suite names or criterion ids; `all` runs everything.
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    #[serde(default = "default_audit_samples")]
    pub audit_samples: usize,
    #[serde(default = "default_audit_seed")]
    pub audit_seed: u64,
}

fn default_suites() -> Vec<String> {
    vec!["all".into()]
}

fn default_audit_samples() -> usize {
    10_000
}

fn default_audit_seed() -> u64 {
    7
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            suites: default_suites(),
            audit_samples: default_audit_samples(),
            audit_seed: default_audit_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Probabilities of leaving through each wall.
    Exit,
    /// Binned exit positions on one wall.
    Histogram,
    /// Occupation of cells at a fixed time by surviving paths.
    Occupation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub estimator: Estimator,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub wall: Wall,
    /// Coordinate binned, counted from 1.
    pub coordinate: usize,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldName {
    /// `x ↦ ∫_{∂₁D} P_D(x, y) dy`.
    Wall1Mass,
    /// `x ↦ ∫_{∂D} P^λ(x, y) dy`, the λ-kernel applied to `f ≡ 1`.
    LambdaMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    pub field: FieldName,
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_steps")]
    pub h: Vec<f64>,
    #[serde(default = "default_panels")]
    pub panels: usize,
}

fn default_steps() -> Vec<f64> {
    vec![1e-3, 5e-4]
}

fn default_panels() -> usize {
    48
}

fn default_params() -> ModelParams {
    ModelParams::new(3, 1.0).expect("valid defaults")
}

/// Everything a run needs, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_params")]
    pub params: ModelParams,
    #[serde(default)]
    pub quad: QuadSpec,
    #[serde(default)]
    pub mc: PathConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeSpec>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            out: None,
            params: default_params(),
            quad: QuadSpec::default(),
            mc: PathConfig::default(),
            points: Vec::new(),
            table: None,
            verify: VerifySpec::default(),
            simulate: None,
            pde: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }
}
