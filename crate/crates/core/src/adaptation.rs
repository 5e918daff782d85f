//! Dead-zone gain schedule and adaptive law.
//!
//! ```text
//!   γ = 0                          if Ω ≤ ρ
//!   γ = (γ₀ λ_max(ωωᵀ) + γ₁) / Ω²   otherwise
//!   θ̂' = -γ Ω (Ω θ̂ - 𝒴)
//! ```
//!
//! `λ_max(ωωᵀ)` is `‖ω‖²`. Outside the dead zone the law is evaluated as
//! `-(γ₀‖ω‖² + γ₁)(θ̂ - 𝒴/Ω)`, which is the same expression with `γΩ²`
//! cancelled symbolically; `Ω` routinely sits far below 1e-100, where
//! forming `1/Ω²` would overflow.

use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationGains {
    pub rho: f64,
    pub gamma0: f64,
    pub gamma1: f64,
}

impl AdaptationGains {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho > 0.0) {
            return Err(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.gamma0 >= 1.0) || !self.gamma0.is_finite() {
            return Err(format!("gamma0 must be ≥ 1, got {}", self.gamma0));
        }
        if !(self.gamma1 >= 0.0) || !self.gamma1.is_finite() {
            return Err(format!("gamma1 must be ≥ 0, got {}", self.gamma1));
        }
        Ok(())
    }

    /// `γ₀‖ω‖² + γ₁`, the effective decay rate `γΩ²` outside the dead zone.
    pub fn effective_rate(&self, omega: &[f64]) -> f64 {
        self.gamma0 * dot(omega, omega) + self.gamma1
    }

    /// Whether the adaptive law is active for this `Ω`.
    pub fn is_active(&self, big_omega: f64) -> bool {
        big_omega > self.rho
    }
}

/// The gain `γ(t)`. May overflow to `+∞` for tiny `Ω`; the engine uses
/// [`theta_rate`] instead.
pub fn gain(big_omega: f64, omega: &[f64], g: &AdaptationGains) -> f64 {
    if !g.is_active(big_omega) {
        return 0.0;
    }
    g.effective_rate(omega) / (big_omega * big_omega)
}

/// `θ̂' = -γΩ(Ωθ̂ - 𝒴)` in the literal form.
pub fn theta_derivative(theta_hat: &Matrix, y: &Matrix, big_omega: f64, gamma: f64) -> Matrix {
    if gamma == 0.0 {
        return Matrix::zeros(theta_hat.rows(), theta_hat.cols());
    }
    (&theta_hat.scale(big_omega) - y).scale(-gamma * big_omega)
}

/// `θ̂'` in the cancelled form `-(γ₀‖ω‖²+γ₁)(θ̂ - 𝒴/Ω)`; exactly zero in the
/// dead zone.
pub fn theta_rate(
    theta_hat: &Matrix,
    y: &Matrix,
    big_omega: f64,
    omega: &[f64],
    g: &AdaptationGains,
) -> Matrix {
    if !g.is_active(big_omega) {
        return Matrix::zeros(theta_hat.rows(), theta_hat.cols());
    }
    let k = g.effective_rate(omega);
    let target = y.scale(1.0 / big_omega);
    (theta_hat - &target).scale(-k)
}
