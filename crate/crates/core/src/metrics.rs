//! Post-run measurements over telemetry: window segmentation, decay fits,
//! monotonicity scans, regression residuals and excitation levels.
//!
//! Everything here is a pure function of a [`Telemetry`] and its ground
//! truth.

use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::dynamics::IdealParameters;
use crate::engine::{Telemetry, TelemetryRow};
use crate::matrix::{norm, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("decay fit needs at least {need} positive samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("sample vectors differ in length ({t} times, {v} values)")]
    Length { t: usize, v: usize },
}

/// `log v = log c1 - c2 (t - t_start)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c1: f64,
    pub c2: f64,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares fit of a decaying exponential through the positive samples.
/// All-zero data gives `c1 = 0, c2 = +∞`.
pub fn fit_decay(t: &[f64], v: &[f64], t_start: f64) -> Result<DecayFit, MetricsError> {
    if t.len() != v.len() {
        return Err(MetricsError::Length { t: t.len(), v: v.len() });
    }
    if !v.is_empty() && v.iter().all(|&x| x == 0.0) {
        return Ok(DecayFit { c1: 0.0, c2: f64::INFINITY });
    }
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(_, &x)| x > 0.0 && x.is_finite())
        .map(|(&t, &x)| (t - t_start, x.ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            need: MIN_FIT_SAMPLES,
            got: pts.len(),
        });
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let (mut stt, mut stl) = (0.0, 0.0);
    for &(s, l) in &pts {
        stt += (s - tm) * (s - tm);
        stl += (s - tm) * (l - lm);
    }
    let slope = if stt > 0.0 { stl / stt } else { 0.0 };
    Ok(DecayFit {
        c1: (lm - slope * tm).exp(),
        c2: -slope,
    })
}

/// [`fit_decay`] on `‖ξ‖` over a row range, time measured from its first row.
pub fn fit_decay_rows(tel: &Telemetry, rows: Range<usize>) -> Result<DecayFit, MetricsError> {
    let rs = &tel.rows[rows];
    let t0 = rs.first().map_or(0.0, |r| r.t);
    let t: Vec<f64> = rs.iter().map(|r| r.t).collect();
    let v: Vec<f64> = rs.iter().map(|r| r.xi_norm).collect();
    fit_decay(&t, &v, t0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monotonicity {
    /// Step-to-step increases of some `|θ̃ₖ|` beyond the slack.
    pub violations: usize,
    /// Largest single-step increase of any `|θ̃ₖ|`; 0 if none.
    pub max_increase: f64,
    /// Component with the largest increase, row-major.
    pub worst_component: Option<usize>,
    pub components: usize,
}

/// Scans every `|θ̃ₖ| = |θ̂ₖ - θₖ|` for increases larger than `slack` per
/// step over `rows`.
pub fn check_monotonicity(
    tel: &Telemetry,
    rows: Range<usize>,
    truth: &IdealParameters,
    slack: f64,
) -> Monotonicity {
    let th = truth.theta.as_slice();
    let mut rep = Monotonicity {
        violations: 0,
        max_increase: 0.0,
        worst_component: None,
        components: th.len(),
    };
    let rs = &tel.rows[rows];
    for pair in rs.windows(2) {
        for (k, &tk) in th.iter().enumerate() {
            let before = (pair[0].theta_hat[k] - tk).abs();
            let after = (pair[1].theta_hat[k] - tk).abs();
            let inc = after - before;
            if inc > rep.max_increase || inc.is_nan() {
                rep.max_increase = if inc.is_nan() { f64::NAN } else { inc };
                rep.worst_component = Some(k);
            }
            if !(inc <= slack) {
                rep.violations += 1;
            }
        }
    }
    rep
}

/// `‖𝒴 - Ωθ‖ / (1 + Ω‖θ‖)` for one sample.
pub fn residual(row: &TelemetryRow, truth: &IdealParameters) -> f64 {
    let th = truth.theta.as_slice();
    let om = row.omega;
    let num = row
        .big_y
        .iter()
        .zip(th)
        .map(|(y, t)| (y - om * t).powi(2))
        .sum::<f64>()
        .sqrt();
    num / (1.0 + om * norm(th))
}

/// Maximum of [`residual`] over `rows`.
pub fn regression_residual(tel: &Telemetry, rows: Range<usize>, truth: &IdealParameters) -> f64 {
    nan_max(tel.rows[rows].iter().map(|r| residual(r, truth)))
}

/// `λ_min` of `∫ φ̄ₙφ̄ₙᵀ dt` over `rows`, trapezoidal in time.
pub fn fe_level(tel: &Telemetry, rows: Range<usize>) -> f64 {
    let rs = &tel.rows[rows];
    let Some(first) = rs.first() else {
        return 0.0;
    };
    let q = first.phi_bar_n.len();
    let mut gram = Matrix::zeros(q, q);
    for pair in rs.windows(2) {
        let dt = pair[1].t - pair[0].t;
        let a = Matrix::outer(&pair[0].phi_bar_n, &pair[0].phi_bar_n);
        let b = Matrix::outer(&pair[1].phi_bar_n, &pair[1].phi_bar_n);
        gram = &gram + &(&a + &b).scale(0.5 * dt);
    }
    gram.sym_eig_extremes().map_or(f64::NAN, |(lo, _)| lo)
}

/// Maximum that propagates `NaN`; `-∞` for an empty iterator.
pub fn nan_max(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, |acc, v| {
        if acc.is_nan() || v.is_nan() {
            f64::NAN
        } else {
            acc.max(v)
        }
    })
}

/// Plant segment `[start, end)` and the sub-ranges of it that the checks
/// use. Row ranges index [`Telemetry::rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: usize,
    pub segment: usize,
    pub start: f64,
    pub end: f64,
    pub rows: Range<usize>,
    /// Filter reset that opened the window's estimation interval; the
    /// window start when no reset fell inside it.
    pub t_hat: f64,
    /// First detector trigger inside the window.
    pub trigger: Option<f64>,
    /// `[t̂ + settle·h, end)`.
    pub clean: Range<usize>,
    /// From the first sample of a run of `sustain` consecutive `Ω > ρ`
    /// samples after `t̂` to the end of the window.
    pub active: Option<Range<usize>>,
    /// The run escaped inside this window or before it.
    pub truncated: bool,
}

/// Splits the run at the true switch instants.
pub fn windows(tel: &Telemetry, sustain: usize, settle: usize) -> Vec<Window> {
    let bounds = tel.segment_bounds();
    let last = bounds.len() - 1;
    let escape_t = tel.escape.map(|e| e.t);
    let mut out = Vec::with_capacity(bounds.len());
    for (index, &(start, end)) in bounds.iter().enumerate() {
        let lo = tel.rows.partition_point(|r| r.t < start);
        let hi = if index == last {
            tel.rows.len()
        } else {
            tel.rows.partition_point(|r| r.t < end)
        };
        let in_window = |t: &f64| *t >= start && (*t < end || index == last);
        let reset = tel.resets.iter().copied().find(in_window);
        let t_hat = if index == 0 { tel.t0 } else { reset.unwrap_or(start) };
        let trigger = tel.triggers.iter().copied().find(in_window);
        let hat_row = tel.rows[lo..hi].partition_point(|r| r.t < t_hat) + lo;
        let clean = (hat_row + settle).min(hi)..hi;

        let mut active = None;
        let mut streak = 0;
        for i in hat_row..hi {
            if tel.rows[i].active {
                streak += 1;
                if streak == sustain.max(1) {
                    active = Some(i + 1 - streak..hi);
                    break;
                }
            } else {
                streak = 0;
            }
        }
        let truncated = escape_t.is_some_and(|t| t <= end || index == last);
        out.push(Window {
            index,
            segment: tel.rows.get(lo).map_or(index, |r| r.seg),
            start,
            end,
            rows: lo..hi,
            t_hat,
            trigger,
            clean,
            active,
            truncated,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub t_hat: f64,
    pub active_start: Option<f64>,
    pub truncated: bool,
    pub fit: Option<DecayFit>,
    /// `‖ξ‖` at the end of the active window over its value at the start.
    pub decay_ratio: f64,
    pub monotonicity: Option<Monotonicity>,
    /// Over the clean sub-window.
    pub max_residual: f64,
    /// `min Ω`, `max Ω` over the active window.
    pub omega_lb: f64,
    pub omega_ub: f64,
    pub fe_alpha: f64,
    /// Trigger time minus window start.
    pub detection_delay: Option<f64>,
}

pub fn window_report(tel: &Telemetry, w: &Window, slack: f64) -> WindowReport {
    let truth = &tel.truth[w.segment];
    let (fit, ratio, mono, lb, ub, alpha) = match &w.active {
        Some(a) if a.len() >= 2 => {
            let rs = &tel.rows[a.clone()];
            let first = rs[0].xi_norm;
            let last = rs[rs.len() - 1].xi_norm;
            let oms = rs.iter().map(|r| r.omega);
            (
                fit_decay_rows(tel, a.clone()).ok(),
                last / first,
                Some(check_monotonicity(tel, a.clone(), truth, slack)),
                -nan_max(oms.clone().map(|v| -v)),
                nan_max(oms),
                fe_level(tel, a.clone()),
            )
        }
        _ => (None, f64::NAN, None, f64::NAN, f64::NAN, f64::NAN),
    };
    WindowReport {
        index: w.index,
        start: w.start,
        end: w.end,
        t_hat: w.t_hat,
        active_start: w.active.as_ref().map(|a| tel.rows[a.start].t),
        truncated: w.truncated,
        fit,
        decay_ratio: ratio,
        monotonicity: mono,
        max_residual: regression_residual(tel, w.clean.clone(), truth),
        omega_lb: lb,
        omega_ub: ub,
        fe_alpha: alpha,
        detection_delay: w.trigger.map(|t| t - w.start),
    }
}

impl fmt::Display for WindowReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "window {} [{}, {})", self.index, self.start, self.end)?;
        if self.truncated {
            write!(f, " (truncated by escape)")?;
        }
        writeln!(f)?;
        writeln!(f, "  t_hat            {}", self.t_hat)?;
        match self.active_start {
            Some(t) => writeln!(f, "  active from      {t}")?,
            None => writeln!(f, "  active from      never")?,
        }
        if let Some(d) = self.detection_delay {
            writeln!(f, "  detection delay  {d:.6e} s")?;
        }
        match self.fit {
            Some(fit) => writeln!(f, "  decay fit        c1 = {:.6e}, c2 = {:.6e} 1/s", fit.c1, fit.c2)?,
            None => writeln!(f, "  decay fit        n/a")?,
        }
        writeln!(f, "  xi end/start     {:.6e}", self.decay_ratio)?;
        match self.monotonicity {
            Some(m) => writeln!(
                f,
                "  monotonicity     {} violations, max step increase {:.3e}",
                m.violations, m.max_increase
            )?,
            None => writeln!(f, "  monotonicity     n/a")?,
        }
        writeln!(f, "  max residual     {:.6e}", self.max_residual)?;
        writeln!(f, "  Omega range      [{:.6e}, {:.6e}]", self.omega_lb, self.omega_ub)?;
        write!(f, "  FE level         {:.6e}", self.fe_alpha)
    }
}
