//! TOML scenario files.
//!
//! ```toml
//! name = "canonical"
//!
//! [plant]
//! x0 = [-1.0, 0.0]
//! [[plant.segments]]
//! t_start = 0.0
//! A = [[1.0, 1.0], [-1.0, -1.0]]
//! B = [[0.8, 0.8], [0.0, 0.8]]
//! theta_unc = [[0.2, 0.0], [0.0, -0.1]]
//!
//! [basis]
//! kind = "componentwise-tanh"
//!
//! [reference_model]
//! A_ref = [[0.0, 1.0], [-4.0, -2.0]]
//! B_ref = [[4.0, 0.0], [0.0, 4.0]]
//! r = [{ kind = "constant", value = 1.0 }, { kind = "exp-decay", a = 1.0, b = 1.0, c = -1.0 }]
//!
//! [gains]
//! l = 10.0
//! sigma = 5.0
//! delta_pr = 0.1
//! rho_auto = { factor = 1e-3, window = 2.0 }
//! gamma0 = 1.0
//! gamma1 = 1.0
//! eps_threshold = 1e-8
//!
//! [integrator]
//! h = 1e-4
//! t_end = 15.0
//! ```
//!
//! Matrices are lists of rows. A bare number for `eps_threshold` is the
//! factor of the `z-scaled` policy; `inf` disables detection.

use serde::Deserialize;
use thiserror::Error;

use crate::detector::ThresholdPolicy;
use crate::dynamics::{Basis, Dims, ModelError, PlantSegment, ReferenceChannel, ReferenceModel, SwitchedPlant};
use crate::engine::{RhoSetting, Scenario, SimError};
use crate::filters::Gains;
use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Dotted path of the offending key, or `<document>` for syntax errors.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    plant: RawPlant,
    basis: Basis,
    reference_model: RawReference,
    gains: RawGains,
    integrator: RawIntegrator,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default)]
    verify: VerifyConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    x0: Vec<f64>,
    segments: Vec<RawSegment>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    t_start: f64,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    theta_unc: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    #[serde(rename = "A_ref")]
    a_ref: Vec<Vec<f64>>,
    #[serde(rename = "B_ref")]
    b_ref: Vec<Vec<f64>>,
    x0_ref: Option<Vec<f64>>,
    r: Vec<ReferenceChannel>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RhoAuto {
    #[serde(default = "default_rho_factor")]
    factor: f64,
    #[serde(default = "default_rho_window")]
    window: f64,
}

fn default_rho_factor() -> f64 {
    1e-3
}

fn default_rho_window() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum RawThreshold {
    Factor(f64),
    Policy(ThresholdPolicy),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    l: f64,
    sigma: f64,
    delta_pr: f64,
    rho: Option<f64>,
    rho_auto: Option<RhoAuto>,
    gamma0: f64,
    gamma1: f64,
    eps_threshold: Option<RawThreshold>,
    #[serde(default)]
    immediate_reset: bool,
    theta_hat0: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    h: f64,
    t_end: f64,
    #[serde(default = "default_x_max")]
    x_max: f64,
}

fn default_x_max() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub decimation: usize,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: None,
            decimation: 1,
            svg: false,
        }
    }
}

/// Pass/fail thresholds for the verification report.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Required number of detector triggers; `None` means one per switch.
    pub expected_triggers: Option<usize>,
    /// Triggers must land within this many steps after a true switch.
    pub trigger_slack_steps: f64,
    pub residual_tol: f64,
    pub monotonicity_slack: f64,
    pub c2_min: f64,
    /// `‖ξ(end)‖ / ‖ξ(start)‖` bound on each active window.
    pub decay_ratio_max: f64,
    /// Consecutive steps with `Ω > ρ` that open an active window.
    pub sustain_steps: usize,
    /// Steps skipped after a reset before residuals are checked.
    pub settle_steps: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            expected_triggers: None,
            trigger_slack_steps: 5.0,
            residual_tol: 1e-3,
            monotonicity_slack: 1e-9,
            c2_min: 0.1,
            decay_ratio_max: 0.05,
            sustain_steps: 10,
            settle_steps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub dims: Dims,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

fn matrix(path: &str, rows: &[Vec<f64>]) -> Result<Matrix, ConfigError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(ConfigError::at(path, "matrix must have at least one row and column"));
    }
    let cols = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(ConfigError::at(
            format!("{path}[{i}]"),
            format!("row has {} entries, expected {cols}", rows[i].len()),
        ));
    }
    Matrix::from_row_major(rows.len(), cols, rows.concat())
        .map_err(|e| ConfigError::at(path, e.to_string()))
}

fn model_error_path(e: &ModelError) -> String {
    match e {
        ModelError::MatchingViolation { segment, .. } | ModelError::RankDeficientB { segment } => {
            format!("plant.segments[{segment}].B")
        }
        ModelError::UnorderedSegments(i) => format!("plant.segments[{i}].t_start"),
        ModelError::NoSegments => "plant.segments".into(),
        ModelError::NotHurwitz => "reference_model.A_ref".into(),
        ModelError::Basis(_) => "basis".into(),
        ModelError::Reference(_) => "reference_model.r".into(),
        ModelError::Dimension(_) | ModelError::Matrix(_) | ModelError::BeforeStart { .. } => {
            "plant".into()
        }
    }
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = toml::Deserializer::new(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<document>".to_string() } else { path };
        ConfigError::at(path, e.into_inner().message().trim().to_string())
    })?;
    build(raw)
}

fn build(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let mut segments = Vec::with_capacity(raw.plant.segments.len());
    for (i, s) in raw.plant.segments.iter().enumerate() {
        let p = format!("plant.segments[{i}]");
        segments.push(PlantSegment {
            a: matrix(&format!("{p}.A"), &s.a)?,
            b: matrix(&format!("{p}.B"), &s.b)?,
            theta_unc: matrix(&format!("{p}.theta_unc"), &s.theta_unc)?,
            t_start: s.t_start,
        });
    }
    if segments.is_empty() {
        return Err(ConfigError::at("plant.segments", "at least one segment is required"));
    }
    let n = segments[0].a.rows();
    let plant = SwitchedPlant {
        segments,
        x0: raw.plant.x0,
        basis: raw.basis,
    };
    let reference = ReferenceModel {
        a_ref: matrix("reference_model.A_ref", &raw.reference_model.a_ref)?,
        b_ref: matrix("reference_model.B_ref", &raw.reference_model.b_ref)?,
        x0_ref: raw.reference_model.x0_ref.unwrap_or_else(|| vec![0.0; n]),
        r: raw.reference_model.r,
    };

    let g = &raw.gains;
    let gains = Gains::new(g.l, g.sigma).map_err(|e| ConfigError::at("gains.l", e.to_string()))?;
    let rho = match (g.rho, g.rho_auto) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::at("gains.rho", "set either rho or rho_auto, not both"))
        }
        (Some(r), None) => RhoSetting::Fixed(r),
        (None, Some(a)) => RhoSetting::Auto {
            factor: a.factor,
            window: a.window,
        },
        (None, None) => RhoSetting::Auto {
            factor: default_rho_factor(),
            window: default_rho_window(),
        },
    };
    let threshold = match g.eps_threshold {
        None => ThresholdPolicy::ZScaled { factor: 1e-8 },
        Some(RawThreshold::Factor(f)) if f.is_infinite() && f > 0.0 => ThresholdPolicy::Disabled,
        Some(RawThreshold::Factor(f)) => ThresholdPolicy::ZScaled { factor: f },
        Some(RawThreshold::Policy(p)) => p,
    };
    let theta_hat0 = match &g.theta_hat0 {
        Some(rows) => Some(matrix("gains.theta_hat0", rows)?),
        None => None,
    };

    let scenario = Scenario {
        name: raw.name.unwrap_or_else(|| "scenario".into()),
        plant,
        reference,
        gains,
        delta_pr: g.delta_pr,
        threshold,
        immediate_reset: g.immediate_reset,
        rho,
        gamma0: g.gamma0,
        gamma1: g.gamma1,
        theta_hat0,
        h: raw.integrator.h,
        t_end: raw.integrator.t_end,
        x_max: raw.integrator.x_max,
    };
    let dims = match scenario.validate() {
        Ok((dims, _)) => dims,
        Err(SimError::Model(e)) => return Err(ConfigError::at(model_error_path(&e), e.to_string())),
        Err(SimError::Detector(e)) => return Err(ConfigError::at("gains.eps_threshold", e.to_string())),
        Err(e) => {
            let msg = e.to_string();
            let path = if msg.contains("theta_hat0") {
                "gains.theta_hat0"
            } else if msg.contains("rho") {
                "gains.rho"
            } else if msg.contains("gamma") {
                "gains"
            } else if msg.contains("delta_pr") {
                "gains.delta_pr"
            } else {
                "integrator"
            };
            return Err(ConfigError::at(path, msg));
        }
    };
    if raw.output.decimation == 0 {
        return Err(ConfigError::at("output.decimation", "must be at least 1"));
    }
    Ok(ScenarioConfig {
        scenario,
        dims,
        output: raw.output,
        verify: raw.verify,
    })
}

/// The bundled canonical scenario.
pub const CANONICAL: &str = include_str!("../../../configs/canonical.toml");
