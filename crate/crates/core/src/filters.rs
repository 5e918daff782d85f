//! Resettable state filters, normalization and dynamic regressor extension
//! and mixing (DREM).
//!
//! Between resets the bank holds
//!
//! ```text
//!   Φ̄' = -l Φ̄ + Φ,                         Φ̄(t̂) = 0
//!   φ̄  = [Φ̄; e^{-l(t-t̂)}],  n_s = 1/(1+φ̄ᵀφ̄)
//!   φ̄ₙ = n_s φ̄,              z̄ₙ = n_s (x - l x̄)
//!   ω_ext = ∫ e^{-σ(τ-t̂)} φ̄ₙφ̄ₙᵀ dτ,      Υ = ∫ e^{-σ(τ-t̂)} φ̄ₙz̄ₙᵀ dτ
//!   z = adj(ω_ext) Υ,        Δ = det(ω_ext)
//! ```
//!
//! The two integrals are carried as ODE states so they share the plant's
//! time grid. `ω_ext` is the extension matrix; it is distinct from the
//! control regressor `ω = [x; r; -Ψ]`.

use thiserror::Error;

use crate::matrix::{dot, MatError, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("time {t} precedes the filter reset instant {t_hat}")]
    TemporalOrder { t: f64, t_hat: f64 },
    #[error("filter gains must be positive (l = {l}, sigma = {sigma})")]
    Gains { l: f64, sigma: f64 },
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Filter constant `l` and DREM weighting rate `σ`, both in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub l: f64,
    pub sigma: f64,
}

impl Gains {
    pub fn new(l: f64, sigma: f64) -> Result<Self, FilterError> {
        if !(l > 0.0 && sigma > 0.0 && l.is_finite() && sigma.is_finite()) {
            return Err(FilterError::Gains { l, sigma });
        }
        Ok(Self { l, sigma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// `Φ̄`, length `n+m+p`.
    pub phi_bar: Vec<f64>,
    /// `q×q`, `q = n+m+p+1`.
    pub omega_ext: Matrix,
    /// `Υ`, `q×n`.
    pub upsilon: Matrix,
    /// Current reset instant `t̂`.
    pub t_hat: f64,
    n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSignals {
    pub phi_bar_n: Vec<f64>,
    pub z_bar_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRates {
    pub phi_bar: Vec<f64>,
    pub omega_ext: Matrix,
    pub upsilon: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DremOutputs {
    /// `q×n`.
    pub z: Matrix,
    pub delta: f64,
    /// Frobenius norm of `adj(ω_ext)`.
    pub adj_norm: f64,
}

impl FilterBank {
    /// Zeroed bank for `n` states and regressor length `regressor_len`,
    /// reset at `t_hat`.
    pub fn new(n: usize, regressor_len: usize, t_hat: f64) -> Self {
        let q = regressor_len + 1;
        Self {
            phi_bar: vec![0.0; regressor_len],
            omega_ext: Matrix::zeros(q, q),
            upsilon: Matrix::zeros(q, n),
            t_hat,
            n,
        }
    }

    /// Reassembles a bank from raw state, e.g. an integrator stage.
    pub fn from_parts(
        phi_bar: Vec<f64>,
        omega_ext: Matrix,
        upsilon: Matrix,
        t_hat: f64,
    ) -> Result<Self, FilterError> {
        let q = phi_bar.len() + 1;
        let n = upsilon.cols();
        if (omega_ext.rows(), omega_ext.cols()) != (q, q) || upsilon.rows() != q {
            return Err(FilterError::Matrix(MatError::Dimension {
                op: "FilterBank::from_parts",
                detail: format!(
                    "Φ̄ of {} needs ω_ext {q}x{q} and Υ {q}xn, got {}x{} and {}x{}",
                    q - 1,
                    omega_ext.rows(),
                    omega_ext.cols(),
                    upsilon.rows(),
                    upsilon.cols()
                ),
            }));
        }
        Ok(Self {
            phi_bar,
            omega_ext,
            upsilon,
            t_hat,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extended_len(&self) -> usize {
        self.phi_bar.len() + 1
    }

    fn check_time(&self, t: f64) -> Result<(), FilterError> {
        if t < self.t_hat {
            return Err(FilterError::TemporalOrder { t, t_hat: self.t_hat });
        }
        Ok(())
    }

    pub fn normalized_signals(
        &self,
        x: &[f64],
        t: f64,
        g: Gains,
    ) -> Result<NormalizedSignals, FilterError> {
        self.check_time(t)?;
        let mut phi_bar_n = Vec::with_capacity(self.phi_bar.len() + 1);
        phi_bar_n.extend_from_slice(&self.phi_bar);
        phi_bar_n.push((-g.l * (t - self.t_hat)).exp());
        let ns = 1.0 / (1.0 + dot(&phi_bar_n, &phi_bar_n));
        for v in phi_bar_n.iter_mut() {
            *v *= ns;
        }
        let z_bar_n = x
            .iter()
            .zip(&self.phi_bar[..self.n])
            .map(|(xi, xbar)| ns * (xi - g.l * xbar))
            .collect();
        Ok(NormalizedSignals { phi_bar_n, z_bar_n })
    }

    /// Right-hand sides of the filter and DREM integral states.
    pub fn filter_derivatives(
        &self,
        phi: &[f64],
        x: &[f64],
        t: f64,
        g: Gains,
    ) -> Result<FilterRates, FilterError> {
        let sig = self.normalized_signals(x, t, g)?;
        Ok(self.rates_from_signals(phi, &sig, t, g))
    }

    pub(crate) fn rates_from_signals(
        &self,
        phi: &[f64],
        sig: &NormalizedSignals,
        t: f64,
        g: Gains,
    ) -> FilterRates {
        let phi_bar = self
            .phi_bar
            .iter()
            .zip(phi)
            .map(|(pb, p)| -g.l * pb + p)
            .collect();
        let w = (-g.sigma * (t - self.t_hat)).exp();
        let weighted: Vec<f64> = sig.phi_bar_n.iter().map(|v| w * v).collect();
        FilterRates {
            phi_bar,
            omega_ext: Matrix::outer(&weighted, &sig.phi_bar_n),
            upsilon: Matrix::outer(&weighted, &sig.z_bar_n),
        }
    }

    /// Zeroes every filter state and moves the reset instant forward.
    pub fn reset(&mut self, t_hat_new: f64) -> Result<(), FilterError> {
        if t_hat_new < self.t_hat {
            return Err(FilterError::TemporalOrder {
                t: t_hat_new,
                t_hat: self.t_hat,
            });
        }
        self.phi_bar.iter_mut().for_each(|v| *v = 0.0);
        self.omega_ext.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        self.upsilon.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        self.t_hat = t_hat_new;
        Ok(())
    }

    /// `z = adj(ω_ext)·Υ`, `Δ = det(ω_ext)`.
    pub fn drem_outputs(&self) -> DremOutputs {
        let (adj, delta) = self
            .omega_ext
            .adjugate_with_det()
            .expect("extension matrix is square by construction");
        DremOutputs {
            z: &adj * &self.upsilon,
            delta,
            adj_norm: adj.frobenius_norm(),
        }
    }
}
