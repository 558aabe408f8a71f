//! Scenario files.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Propagate,
    Dyson,
    Secondary,
    Uv,
    Commute,
    Witness,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Propagate => "propagate",
            Kind::Dyson => "dyson",
            Kind::Secondary => "secondary",
            Kind::Uv => "uv",
            Kind::Commute => "commute",
            Kind::Witness => "witness",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A real scalar (times the identity) or row-major `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Entries(Vec<Vec<[f64; 2]>>),
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec::Scalar(0.0)
    }
}

impl MatrixSpec {
    /// Side length when given explicitly.
    pub fn dim(&self) -> Option<usize> {
        match self {
            MatrixSpec::Scalar(_) => None,
            MatrixSpec::Entries(rows) => Some(rows.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Catalog {
    /// `a / (1 + t²)`.
    InverseSquare,
    /// `a (1 + |t|)^(-ν)`.
    Power,
    /// `a exp(-t² / 2w²)`.
    Gaussian,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemainderConfig {
    pub catalog: Catalog,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default)]
    pub c_plus: MatrixSpec,
    #[serde(default)]
    pub b_plus: MatrixSpec,
    #[serde(default)]
    pub c_minus: MatrixSpec,
    #[serde(default)]
    pub b_minus: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<RemainderConfig>,
    /// Decay exponent of the remainder.
    #[serde(default = "two")]
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub tau: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub start: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllForm {
    /// `ℓ(q) = q² + value`.
    ShiftedSquare,
    /// `ℓ(q) = value`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllConfig {
    pub form: EllForm,
    pub value: f64,
}

impl Default for EllConfig {
    fn default() -> Self {
        EllConfig { form: EllForm::ShiftedSquare, value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Linear,
    Superficial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UvConfig {
    #[serde(default)]
    pub ell: EllConfig,
    #[serde(default = "one")]
    pub m_bound: f64,
    #[serde(default = "mu_default")]
    pub mu: usize,
    #[serde(default = "kernel_default")]
    pub kernel: KernelChoice,
    #[serde(default = "orders_default")]
    pub angular_orders: [usize; 3],
    /// Explicit grid; the seeded default grid is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_grid: Option<Vec<[f64; 4]>>,
}

impl Default for UvConfig {
    fn default() -> Self {
        UvConfig {
            ell: EllConfig::default(),
            m_bound: 1.0,
            mu: mu_default(),
            kernel: kernel_default(),
            angular_orders: orders_default(),
            q_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommuteConfig {
    /// Builds the seeded commuting model of this size. Explicit scenarios
    /// use `W₀(t) = exp(it𝒞±)` on either side of zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<MatrixSpec>,
    /// Scaled tail `εC₊`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_plus: Option<MatrixSpec>,
    /// Scaled tail `εC₋`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_minus: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<MatrixSpec>,
    #[serde(default = "t_grid_default")]
    pub t_grid: Vec<f64>,
    #[serde(default = "tau_grid_default")]
    pub tau_grid: Vec<f64>,
    #[serde(default = "one")]
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    #[serde(default = "order_default")]
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uv: Option<UvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commute: Option<CommuteConfig>,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn mu_default() -> usize {
    1
}
fn kernel_default() -> KernelChoice {
    KernelChoice::Linear
}
fn orders_default() -> [usize; 3] {
    secscat::uv::DEFAULT_ANGULAR_ORDERS
}
fn order_default() -> usize {
    12
}
fn t_grid_default() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0, 10000.0]
}
fn tau_grid_default() -> Vec<f64> {
    vec![1.0]
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Validation(vec![Finding::new("$", format!("malformed scenario: {e}"))])
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Tolerance used when the scenario leaves it out.
    pub fn tol_or_default(&self) -> f64 {
        self.tol.unwrap_or(match self.kind {
            Kind::Uv => 1e-8,
            Kind::Witness => 1e-6,
            _ => secscat::regularization::DEFAULT_TOL,
        })
    }
}

/// A schema or semantic problem located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub path: String,
    pub message: String,
}

impl Finding {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Finding { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}
