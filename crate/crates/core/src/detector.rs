//! Parameter-switch indicator and the reset scheduling rule.
//!
//! The indicator `ε = Δ·φ̄ₙz̄ₙᵀ - φ̄ₙφ̄ₙᵀz` vanishes identically while the
//! filters only contain data from a single plant segment. The scheduler
//! fires when `t - t_up ≥ Δ_pr` and `‖ε‖` exceeds the threshold, schedules
//! the filter reset at `t + Δ_pr`, and records `t_up = t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{norm, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("detector evaluated at {t} after {last}")]
    TemporalOrder { t: f64, last: f64 },
    #[error("invalid detector configuration: {0}")]
    Config(String),
}

/// `ε = Δ·φ̄ₙz̄ₙᵀ - φ̄ₙφ̄ₙᵀz`, `q×n`.
pub fn indicator(delta: f64, phi_bar_n: &[f64], z_bar_n: &[f64], z: &Matrix) -> Matrix {
    Matrix::outer(phi_bar_n, &indicator_residual(delta, phi_bar_n, z_bar_n, z))
}

/// `Δ·z̄ₙ - zᵀφ̄ₙ`; the indicator is `φ̄ₙ` times the transpose of this.
fn indicator_residual(delta: f64, phi_bar_n: &[f64], z_bar_n: &[f64], z: &Matrix) -> Vec<f64> {
    let ztp = z
        .tr_mul_vec(phi_bar_n)
        .expect("indicator: z rows must match φ̄ₙ length");
    z_bar_n
        .iter()
        .zip(&ztp)
        .map(|(zb, zp)| delta * zb - zp)
        .collect()
}

/// Frobenius norm of [`indicator`] without forming the matrix.
pub fn indicator_norm(delta: f64, phi_bar_n: &[f64], z_bar_n: &[f64], z: &Matrix) -> f64 {
    norm(phi_bar_n) * norm(&indicator_residual(delta, phi_bar_n, z_bar_n, z))
}

/// How the `‖ε‖ > threshold` comparison is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// Fixed value.
    Absolute { value: f64 },
    /// `factor · (1 + running max ‖z‖)`.
    ZScaled { factor: f64 },
    /// `factor · ‖φ̄ₙ‖² · ‖adj(ω_ext)‖ · ‖Υ‖`: multiples of the magnitude at
    /// which rounding in `adj(ω_ext)·Υ` shows up in `ε`.
    RoundingScaled { factor: f64 },
    /// `factor · |Δ| · ‖φ̄ₙ‖ · ‖z̄ₙ‖`, i.e. `‖ε‖` relative to the size of
    /// either of its terms. Armed only after the ratio has stayed at or
    /// below `factor` for `arm_steps` consecutive samples since the last
    /// reset; until then `Δ` is too small for the ratio to mean anything.
    Relative { factor: f64, arm_steps: u32 },
    /// Never fires.
    Disabled,
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let v = match self {
            ThresholdPolicy::Absolute { value } => *value,
            ThresholdPolicy::ZScaled { factor }
            | ThresholdPolicy::RoundingScaled { factor }
            | ThresholdPolicy::Relative { factor, .. } => *factor,
            ThresholdPolicy::Disabled => return Ok(()),
        };
        if v.is_nan() || v < 0.0 {
            return Err(DetectorError::Config(format!("threshold must be ≥ 0, got {v}")));
        }
        Ok(())
    }

    pub fn is_disabled(&self) -> bool {
        match self {
            ThresholdPolicy::Disabled => true,
            ThresholdPolicy::Absolute { value } => value.is_infinite(),
            ThresholdPolicy::ZScaled { factor }
            | ThresholdPolicy::RoundingScaled { factor }
            | ThresholdPolicy::Relative { factor, .. } => factor.is_infinite(),
        }
    }

    /// Threshold for the current sample.
    pub fn threshold(&self, scale: &IndicatorScale) -> f64 {
        match *self {
            ThresholdPolicy::Absolute { value } => value,
            ThresholdPolicy::ZScaled { factor } => factor * (1.0 + scale.running_max_z),
            ThresholdPolicy::RoundingScaled { factor } => factor * scale.rounding,
            ThresholdPolicy::Relative { factor, arm_steps } => {
                if scale.quiet_steps >= arm_steps {
                    factor * scale.relative_base
                } else {
                    f64::INFINITY
                }
            }
            ThresholdPolicy::Disabled => f64::INFINITY,
        }
    }
}

/// Magnitudes the threshold policies scale with.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IndicatorScale {
    pub running_max_z: f64,
    pub rounding: f64,
    /// `|Δ| · ‖φ̄ₙ‖ · ‖z̄ₙ‖`.
    pub relative_base: f64,
    /// Consecutive samples since the last reset with
    /// `‖ε‖ ≤ factor · relative_base`; latches once it reaches `arm_steps`
    /// (only tracked for [`ThresholdPolicy::Relative`]).
    pub quiet_steps: u32,
}

impl IndicatorScale {
    /// Advances the arming counter of a relative policy with the current
    /// sample. Call after the threshold for this sample has been taken.
    pub fn track_quiet(&mut self, policy: &ThresholdPolicy, eps_norm: f64) {
        if let ThresholdPolicy::Relative { factor, arm_steps } = *policy {
            if self.quiet_steps >= arm_steps {
                return;
            }
            if self.relative_base > 0.0 && eps_norm <= factor * self.relative_base {
                self.quiet_steps += 1;
            } else {
                self.quiet_steps = 0;
            }
        }
    }
}

/// What the engine should do after a detector evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorAction {
    None,
    ScheduleReset(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    /// Time of the last trigger (initially the first reset instant).
    pub t_up: f64,
    /// Switch-estimate counter, starts at 1.
    pub counter: u32,
    pub pending_reset: Option<f64>,
    pub eps_threshold: f64,
    pub delta_pr: f64,
    /// Reset at the detection instant instead of `Δ_pr` later.
    pub immediate_reset: bool,
    last_t: f64,
}

impl DetectorState {
    pub fn new(t_hat0: f64, delta_pr: f64, immediate_reset: bool) -> Result<Self, DetectorError> {
        if !(delta_pr > 0.0 && delta_pr.is_finite()) {
            return Err(DetectorError::Config(format!("Δ_pr must be positive, got {delta_pr}")));
        }
        Ok(Self {
            t_up: t_hat0,
            counter: 1,
            pending_reset: None,
            eps_threshold: f64::INFINITY,
            delta_pr,
            immediate_reset,
            last_t: f64::NEG_INFINITY,
        })
    }

    /// One evaluation of the scheduling rule at time `t`.
    pub fn step(&mut self, eps_norm: f64, t: f64) -> Result<DetectorAction, DetectorError> {
        if t < self.last_t {
            return Err(DetectorError::TemporalOrder { t, last: self.last_t });
        }
        self.last_t = t;
        // half a nanosecond of slack absorbs grid rounding in t - t_up
        if t - self.t_up >= self.delta_pr - 5e-10 && eps_norm > self.eps_threshold {
            let t_hat = if self.immediate_reset { t } else { t + self.delta_pr };
            self.t_up = t;
            self.counter += 1;
            self.pending_reset = Some(t_hat);
            return Ok(DetectorAction::ScheduleReset(t_hat));
        }
        Ok(DetectorAction::None)
    }

    /// Called by the engine once the pending reset has been applied.
    pub fn clear_pending(&mut self) {
        self.pending_reset = None;
    }
}
