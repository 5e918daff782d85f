//! Switched plant, reference model, control regressor and the ideal
//! (model-following) parameters used as ground truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{MatError, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("time {t} precedes the initial instant {t0}")]
    BeforeStart { t: f64, t0: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("segment {segment}: model-following condition unsolvable (residual {residual:e})")]
    MatchingViolation { segment: usize, residual: f64 },
    #[error("segment {segment}: control matrix B does not have full column rank")]
    RankDeficientB { segment: usize },
    #[error("reference model state matrix is not Hurwitz")]
    NotHurwitz,
    #[error("switch instants must be strictly increasing (segment {0})")]
    UnorderedSegments(usize),
    #[error("plant needs at least one segment")]
    NoSegments,
    #[error("invalid basis: {0}")]
    Basis(String),
    #[error("invalid reference signal: {0}")]
    Reference(String),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Problem dimensions: `n` states, `m` inputs, `p` basis functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl Dims {
    /// Length of the control regressor `[x; r; -Ψ]` and of `Φ = [x; u; Ψ]`.
    #[inline]
    pub fn regressor_len(&self) -> usize {
        self.n + self.m + self.p
    }

    /// Side of the DREM extension matrix.
    #[inline]
    pub fn extended_len(&self) -> usize {
        self.regressor_len() + 1
    }
}

/// Scalar nonlinearity applied to one state component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFn {
    Tanh,
    Sin,
    Cos,
    Pow(u32),
}

impl BasisFn {
    fn eval(self, v: f64) -> f64 {
        match self {
            BasisFn::Tanh => v.tanh(),
            BasisFn::Sin => v.sin(),
            BasisFn::Cos => v.cos(),
            BasisFn::Pow(d) => v.powi(d as i32),
        }
    }
}

/// One row of a custom basis table: `Ψ_k(x) = func(gain · x[input])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub input: usize,
    pub func: BasisFn,
    #[serde(default = "one")]
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}

/// Known basis functions `Ψ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Basis {
    /// `Ψ_k = tanh(gain·x_k)`, `p = n`.
    ComponentwiseTanh {
        #[serde(default = "one")]
        gain: f64,
    },
    /// `Ψ = [x_k^d]` for `d = 2..=degree` and every component, `p = n(degree-1)`.
    Monomials { degree: u32 },
    /// `Ψ_k = sin(freq·x_k)`, `p = n`.
    Sinusoid {
        #[serde(default = "one")]
        freq: f64,
    },
    /// Arbitrary list of scalar terms.
    Table { terms: Vec<BasisTerm> },
}

impl Basis {
    pub fn tanh() -> Self {
        Basis::ComponentwiseTanh { gain: 1.0 }
    }

    /// Output dimension `p` for an `n`-dimensional state.
    pub fn dim(&self, n: usize) -> usize {
        match self {
            Basis::ComponentwiseTanh { .. } | Basis::Sinusoid { .. } => n,
            Basis::Monomials { degree } => n * (degree.saturating_sub(1) as usize),
            Basis::Table { terms } => terms.len(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        match self {
            Basis::ComponentwiseTanh { gain } | Basis::Sinusoid { freq: gain } => {
                if !gain.is_finite() || *gain == 0.0 {
                    return Err(ModelError::Basis("gain must be finite and non-zero".into()));
                }
            }
            Basis::Monomials { degree } => {
                if *degree < 2 {
                    return Err(ModelError::Basis("monomial degree must be at least 2".into()));
                }
            }
            Basis::Table { terms } => {
                if terms.is_empty() {
                    return Err(ModelError::Basis("empty basis table".into()));
                }
                if let Some(t) = terms.iter().find(|t| t.input >= n || !t.gain.is_finite()) {
                    return Err(ModelError::Basis(format!(
                        "term on input {} invalid for n = {n}",
                        t.input
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Basis::ComponentwiseTanh { gain } => x.iter().map(|v| (gain * v).tanh()).collect(),
            Basis::Sinusoid { freq } => x.iter().map(|v| (freq * v).sin()).collect(),
            Basis::Monomials { degree } => (2..=*degree)
                .flat_map(|d| x.iter().map(move |v| v.powi(d as i32)))
                .collect(),
            Basis::Table { terms } => terms
                .iter()
                .map(|t| t.func.eval(t.gain * x[t.input]))
                .collect(),
        }
    }
}

/// One channel of the reference input `r(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceChannel {
    Constant { value: f64 },
    /// `a·e^{-b t} + c`
    ExpDecay { a: f64, b: f64, c: f64 },
    /// `amplitude·sin(freq·t + phase) + offset`, `freq` in rad/s.
    Sinusoid {
        amplitude: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `values[k]` on `[times[k], times[k+1])`; `values[0]` before `times[0]`.
    PiecewiseConstant { times: Vec<f64>, values: Vec<f64> },
}

impl ReferenceChannel {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ReferenceChannel::Constant { value } => *value,
            ReferenceChannel::ExpDecay { a, b, c } => a * (-b * t).exp() + c,
            ReferenceChannel::Sinusoid {
                amplitude,
                freq,
                phase,
                offset,
            } => amplitude * (freq * t + phase).sin() + offset,
            ReferenceChannel::PiecewiseConstant { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                values[k.saturating_sub(1)]
            }
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if let ReferenceChannel::PiecewiseConstant { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(ModelError::Reference(
                    "piecewise-constant needs matching non-empty times/values".into(),
                ));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ModelError::Reference("piecewise-constant times must increase".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSegment {
    pub a: Matrix,
    pub b: Matrix,
    /// `ϑ`, `p×m`.
    pub theta_unc: Matrix,
    pub t_start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedPlant {
    pub segments: Vec<PlantSegment>,
    pub x0: Vec<f64>,
    pub basis: Basis,
}

impl SwitchedPlant {
    pub fn dims(&self) -> Dims {
        let seg = &self.segments[0];
        let n = seg.a.rows();
        Dims {
            n,
            m: seg.b.cols(),
            p: self.basis.dim(n),
        }
    }

    pub fn t0(&self) -> f64 {
        self.segments[0].t_start
    }

    /// Structural checks: ordering, shapes, basis.
    pub fn validate(&self) -> Result<Dims, ModelError> {
        if self.segments.is_empty() {
            return Err(ModelError::NoSegments);
        }
        let dims = self.dims();
        let Dims { n, m, p } = dims;
        self.basis.validate(n)?;
        if self.x0.len() != n {
            return Err(ModelError::Dimension(format!("x0 has {} entries, n = {n}", self.x0.len())));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if (seg.a.rows(), seg.a.cols()) != (n, n)
                || (seg.b.rows(), seg.b.cols()) != (n, m)
                || (seg.theta_unc.rows(), seg.theta_unc.cols()) != (p, m)
            {
                return Err(ModelError::Dimension(format!(
                    "segment {i}: expected A {n}x{n}, B {n}x{m}, theta {p}x{m}"
                )));
            }
            if i > 0 && seg.t_start <= self.segments[i - 1].t_start {
                return Err(ModelError::UnorderedSegments(i));
            }
        }
        Ok(dims)
    }

    /// Switch instants after the initial one.
    pub fn switch_times(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.t_start).collect()
    }

    /// Index of the segment active at `t` (half-open intervals: the switch
    /// instant belongs to the new segment).
    pub fn active_segment(&self, t: f64) -> Result<usize, ModelError> {
        let t0 = self.t0();
        if t < t0 {
            return Err(ModelError::BeforeStart { t, t0 });
        }
        Ok(self.segments.partition_point(|s| s.t_start <= t) - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub a_ref: Matrix,
    pub b_ref: Matrix,
    pub x0_ref: Vec<f64>,
    pub r: Vec<ReferenceChannel>,
}

impl ReferenceModel {
    pub fn validate(&self, dims: Dims) -> Result<(), ModelError> {
        let Dims { n, m, .. } = dims;
        if (self.a_ref.rows(), self.a_ref.cols()) != (n, n)
            || (self.b_ref.rows(), self.b_ref.cols()) != (n, m)
            || self.x0_ref.len() != n
            || self.r.len() != m
        {
            return Err(ModelError::Dimension(format!(
                "reference model must have A_ref {n}x{n}, B_ref {n}x{m}, x0_ref of {n}, {m} reference channels"
            )));
        }
        for ch in &self.r {
            ch.validate()?;
        }
        if !is_hurwitz(&self.a_ref)? {
            return Err(ModelError::NotHurwitz);
        }
        Ok(())
    }

    pub fn reference(&self, t: f64) -> Vec<f64> {
        self.r.iter().map(|c| c.eval(t)).collect()
    }
}

/// Characteristic polynomial coefficients `[1, c1, ..., cn]` of
/// `det(sI - A)` by the Faddeev–LeVerrier recursion.
pub fn char_poly(a: &Matrix) -> Result<Vec<f64>, MatError> {
    if !a.is_square() {
        return Err(MatError::Dimension {
            op: "char_poly",
            detail: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    let mut coeffs = vec![1.0];
    let mut m = Matrix::zeros(n, n);
    let id = Matrix::identity(n);
    for k in 1..=n {
        let c_prev = coeffs[k - 1];
        m = &(a * &m) + &id.scale(c_prev);
        let am = a * &m;
        let trace: f64 = (0..n).map(|i| am[(i, i)]).sum();
        coeffs.push(-trace / k as f64);
    }
    Ok(coeffs)
}

/// Routh–Hurwitz test on the characteristic polynomial: every root strictly
/// in the open left half-plane.
pub fn is_hurwitz(a: &Matrix) -> Result<bool, MatError> {
    let coeffs = char_poly(a)?;
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(true);
    }
    if coeffs.iter().any(|&c| c <= 0.0) {
        return Ok(false);
    }
    let mut prev: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
    let scale = coeffs.iter().fold(0.0_f64, |s, c| s.max(c.abs()));
    for _ in 0..n {
        let lead = cur.first().copied().unwrap_or(0.0);
        if lead <= 1e-14 * scale {
            return Ok(false);
        }
        let next: Vec<f64> = (0..prev.len().saturating_sub(1))
            .map(|j| {
                let c = cur.get(j + 1).copied().unwrap_or(0.0);
                prev[j + 1] - prev[0] * c / lead
            })
            .collect();
        prev = cur;
        cur = next;
        if cur.is_empty() {
            break;
        }
    }
    Ok(true)
}

/// `ẋ = A x + B (u + ϑᵀΨ(x))`.
pub fn plant_derivative(
    x: &[f64],
    u: &[f64],
    seg: &PlantSegment,
    basis: &Basis,
) -> Result<Vec<f64>, ModelError> {
    let psi = basis.eval(x);
    plant_derivative_with_psi(x, u, &psi, seg)
}

/// Same as [`plant_derivative`] with `Ψ(x)` already evaluated.
pub fn plant_derivative_with_psi(
    x: &[f64],
    u: &[f64],
    psi: &[f64],
    seg: &PlantSegment,
) -> Result<Vec<f64>, ModelError> {
    if u.len() != seg.b.cols() || psi.len() != seg.theta_unc.rows() || x.len() != seg.a.cols() {
        return Err(ModelError::Dimension(format!(
            "plant derivative: x {}, u {}, Ψ {} against A {}x{}, B {}x{}",
            x.len(),
            u.len(),
            psi.len(),
            seg.a.rows(),
            seg.a.cols(),
            seg.b.rows(),
            seg.b.cols()
        )));
    }
    let matched = seg.theta_unc.tr_mul_vec(psi)?;
    let v: Vec<f64> = u.iter().zip(&matched).map(|(a, b)| a + b).collect();
    let ax = seg.a.mul_vec(x)?;
    let bv = seg.b.mul_vec(&v)?;
    Ok(ax.iter().zip(&bv).map(|(a, b)| a + b).collect())
}

/// `ẋ_ref = A_ref x_ref + B_ref r`.
pub fn ref_model_derivative(
    x_ref: &[f64],
    r: &[f64],
    rm: &ReferenceModel,
) -> Result<Vec<f64>, ModelError> {
    let ax = rm.a_ref.mul_vec(x_ref)?;
    let br = rm.b_ref.mul_vec(r)?;
    Ok(ax.iter().zip(&br).map(|(a, b)| a + b).collect())
}

/// Control regressor `ω = [xᵀ, rᵀ, -Ψᵀ(x)]ᵀ`.
pub fn control_regressor(x: &[f64], r: &[f64], basis: &Basis) -> Vec<f64> {
    regressor_from_psi(x, r, &basis.eval(x))
}

pub fn regressor_from_psi(x: &[f64], r: &[f64], psi: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(x.len() + r.len() + psi.len());
    w.extend_from_slice(x);
    w.extend_from_slice(r);
    w.extend(psi.iter().map(|v| -v));
    w
}

/// `u = θ̂ᵀω`.
pub fn control_law(theta_hat: &Matrix, omega: &[f64]) -> Result<Vec<f64>, ModelError> {
    Ok(theta_hat.tr_mul_vec(omega)?)
}

/// Stacked ideal parameters `θ = [Kˣᵀ; Kʳᵀ; ϑ]`, `(n+m+p)×m`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealParameters {
    pub k_x: Matrix,
    pub k_r: Matrix,
    pub theta: Matrix,
}

/// Solves `A + B Kˣ = A_ref`, `B Kʳ = B_ref` for one segment.
pub fn ideal_parameters(
    seg: &PlantSegment,
    rm: &ReferenceModel,
    segment: usize,
) -> Result<IdealParameters, ModelError> {
    let b = &seg.b;
    let (n, m) = (b.rows(), b.cols());
    if m > n {
        return Err(ModelError::RankDeficientB { segment });
    }
    let btb = &b.transpose() * b;
    let gram_inv = btb
        .invert_with_threshold(1e-12)
        .map_err(|_| ModelError::RankDeficientB { segment })?;
    // least squares; exact when B is square
    let pinv = &gram_inv * &b.transpose();
    let k_x = &pinv * &(&rm.a_ref - &seg.a);
    let k_r = &pinv * &rm.b_ref;
    let res_x = (&(&seg.a + &(b * &k_x)) - &rm.a_ref).max_abs();
    let res_r = (&(b * &k_r) - &rm.b_ref).max_abs();
    let residual = res_x.max(res_r);
    let tol = if m == n { 1e-9 } else { 1e-8 };
    let ref_scale = rm.a_ref.max_abs().max(rm.b_ref.max_abs()).max(1.0);
    if residual > tol * ref_scale {
        return Err(ModelError::MatchingViolation { segment, residual });
    }
    let theta = Matrix::vstack(&[&k_x.transpose(), &k_r.transpose(), &seg.theta_unc])?;
    Ok(IdealParameters { k_x, k_r, theta })
}
