//! Closed-loop simulation: plant, reference model, filter bank and estimate
//! integrated as one RK4 state vector, with step boundaries aligned to plant
//! switches and scheduled filter resets.

use thiserror::Error;

use crate::adaptation::{theta_rate, AdaptationGains};
use crate::detector::{
    indicator_norm, DetectorAction, DetectorError, DetectorState, IndicatorScale, ThresholdPolicy,
};
use crate::dynamics::{
    ideal_parameters, plant_derivative_with_psi, ref_model_derivative, regressor_from_psi, Dims,
    IdealParameters, ModelError, ReferenceModel, SwitchedPlant,
};
use crate::filters::{FilterBank, FilterError, Gains, NormalizedSignals};
use crate::integrator::Rk4;
use crate::matrix::{norm, MatError, Matrix};
use crate::regression::{build_regression, slice_z, Regression};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error("finite escape at t = {t}: |x| = {x_norm:e} (segment {segment})")]
    FiniteEscape { t: f64, x_norm: f64, segment: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoSetting {
    Fixed(f64),
    /// `ρ = factor · max Ω` over a dry run of length `window` with the
    /// detector disabled and the estimate frozen.
    Auto { factor: f64, window: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: SwitchedPlant,
    pub reference: ReferenceModel,
    pub gains: Gains,
    pub delta_pr: f64,
    pub threshold: ThresholdPolicy,
    pub immediate_reset: bool,
    pub rho: RhoSetting,
    pub gamma0: f64,
    pub gamma1: f64,
    /// `None` means `[0; I_m; 0]`.
    pub theta_hat0: Option<Matrix>,
    pub h: f64,
    pub t_end: f64,
    pub x_max: f64,
}

impl Scenario {
    /// Structural validation plus the matching condition for every segment.
    pub fn validate(&self) -> Result<(Dims, Vec<IdealParameters>), SimError> {
        let dims = self.plant.validate()?;
        self.reference.validate(dims)?;
        let truth = self
            .plant
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| ideal_parameters(s, &self.reference, i))
            .collect::<Result<Vec<_>, _>>()?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(SimError::Config(format!("h must be positive, got {}", self.h)));
        }
        if !(self.t_end > self.plant.t0()) || !self.t_end.is_finite() {
            return Err(SimError::Config(format!(
                "t_end = {} must lie after t0 = {}",
                self.t_end,
                self.plant.t0()
            )));
        }
        if !(self.x_max > 0.0) {
            return Err(SimError::Config(format!("x_max must be positive, got {}", self.x_max)));
        }
        if !(self.delta_pr > 0.0 && self.delta_pr.is_finite()) {
            return Err(SimError::Config(format!("delta_pr must be positive, got {}", self.delta_pr)));
        }
        self.threshold.validate()?;
        match self.rho {
            RhoSetting::Fixed(rho) => {
                if !(rho > 0.0) {
                    return Err(SimError::Config(format!("rho must be positive, got {rho}")));
                }
            }
            RhoSetting::Auto { factor, window } => {
                if !(factor > 0.0 && factor.is_finite() && window > 0.0 && window.is_finite()) {
                    return Err(SimError::Config(format!(
                        "rho_auto needs positive factor and window, got {factor}, {window}"
                    )));
                }
            }
        }
        AdaptationGains {
            rho: 1.0,
            gamma0: self.gamma0,
            gamma1: self.gamma1,
        }
        .validate()
        .map_err(SimError::Config)?;
        if let Some(th) = &self.theta_hat0 {
            if (th.rows(), th.cols()) != (dims.regressor_len(), dims.m) {
                return Err(SimError::Config(format!(
                    "theta_hat0 must be {}x{}, got {}x{}",
                    dims.regressor_len(),
                    dims.m,
                    th.rows(),
                    th.cols()
                )));
            }
        }
        Ok((dims, truth))
    }

    pub fn initial_estimate(&self) -> Matrix {
        if let Some(th) = &self.theta_hat0 {
            return th.clone();
        }
        let Dims { n, m, .. } = self.plant.dims();
        let mut th = Matrix::zeros(self.plant.dims().regressor_len(), m);
        for j in 0..m {
            th[(n + j, j)] = 1.0;
        }
        th
    }
}

/// One telemetry sample. Fields past `reset_flag` are diagnostics computed
/// against the ground truth; the controller never reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub x_ref: Vec<f64>,
    pub u: Vec<f64>,
    /// `θ̂`, row-major.
    pub theta_hat: Vec<f64>,
    pub omega: f64,
    pub delta: f64,
    pub eps_norm: f64,
    pub eref_norm: f64,
    pub thetatilde_norm: f64,
    pub xi_norm: f64,
    pub seg: usize,
    pub ihat: u32,
    pub reset_flag: bool,

    /// `θ̂ - θ_seg`, row-major.
    pub theta_tilde: Vec<f64>,
    pub phi_bar_n: Vec<f64>,
    pub z_norm: f64,
    pub eps_threshold: f64,
    /// `Ω > ρ` at this sample.
    pub active: bool,
    /// Last reset instant at or before `t`.
    pub t_hat: f64,
    /// `𝒴`, row-major, same shape as `θ̂`.
    pub big_y: Vec<f64>,
    /// `‖𝒴/Ω - θ‖ / ‖θ‖`, `NaN` when `Ω = 0`.
    pub rel_estimate_error: f64,
    /// `‖z - ΔΘ̄‖ / (Δ‖Θ̄‖)`, `NaN` when `Δ = 0`.
    pub z_identity_rel: f64,
    /// `|Ω / (Δ^{2m} det(BᵀB)) - 1|`, `NaN` when `Δ = 0`.
    pub omega_identity_rel: f64,
    /// `‖ε‖ / (1 + running max ‖z‖)`.
    pub eps_scaled: f64,
    /// `‖ε‖ / (|Δ|·‖φ̄ₙ‖·‖z̄ₙ‖)`, `NaN` when the denominator vanishes.
    pub eps_relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Telemetry {
    pub name: String,
    pub dims: Dims,
    pub h: f64,
    pub t0: f64,
    pub t_end: f64,
    pub rho: f64,
    pub delta_pr: f64,
    pub switch_times: Vec<f64>,
    pub truth: Vec<IdealParameters>,
    pub rows: Vec<TelemetryRow>,
    /// Detection instants.
    pub triggers: Vec<f64>,
    /// Applied filter resets, excluding the initial one.
    pub resets: Vec<f64>,
    /// Set when the run stopped early on the divergence guard; `rows` then
    /// ends at the last finite sample.
    pub escape: Option<Escape>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Escape {
    pub t: f64,
    pub x_norm: f64,
    pub segment: usize,
}

impl From<Escape> for SimError {
    fn from(e: Escape) -> Self {
        SimError::FiniteEscape {
            t: e.t,
            x_norm: e.x_norm,
            segment: e.segment,
        }
    }
}

impl Telemetry {
    /// `(start, end)` of each plant segment within the run.
    pub fn segment_bounds(&self) -> Vec<(f64, f64)> {
        let mut starts = vec![self.t0];
        starts.extend(self.switch_times.iter().copied().filter(|&s| s < self.t_end));
        let mut ends: Vec<f64> = starts[1..].to_vec();
        ends.push(self.t_end);
        starts.into_iter().zip(ends).collect()
    }
}

struct Layout {
    dims: Dims,
    x: usize,
    x_ref: usize,
    phi_bar: usize,
    omega_ext: usize,
    upsilon: usize,
    theta: usize,
    len: usize,
}

impl Layout {
    fn new(dims: Dims) -> Self {
        let Dims { n, m, .. } = dims;
        let nr = dims.regressor_len();
        let q = dims.extended_len();
        let x = 0;
        let x_ref = x + n;
        let phi_bar = x_ref + n;
        let omega_ext = phi_bar + nr;
        let upsilon = omega_ext + q * q;
        let theta = upsilon + q * n;
        let len = theta + nr * m;
        Self {
            dims,
            x,
            x_ref,
            phi_bar,
            omega_ext,
            upsilon,
            theta,
            len,
        }
    }

    fn x<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        &y[self.x..self.x + self.dims.n]
    }

    fn x_ref<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        &y[self.x_ref..self.x_ref + self.dims.n]
    }

    fn theta(&self, y: &[f64]) -> Matrix {
        let nr = self.dims.regressor_len();
        Matrix::from_row_major(nr, self.dims.m, y[self.theta..self.len].to_vec())
            .unwrap_or_else(|_| Matrix::zeros(nr, self.dims.m))
    }

    fn bank(&self, y: &[f64], t_hat: f64) -> Result<FilterBank, SimError> {
        let q = self.dims.extended_len();
        let n = self.dims.n;
        // the raw slices may hold NaN mid-step; keep them and let the guard trip
        let omega_ext = raw_matrix(q, q, &y[self.omega_ext..self.upsilon]);
        let upsilon = raw_matrix(q, n, &y[self.upsilon..self.theta]);
        Ok(FilterBank::from_parts(
            y[self.phi_bar..self.omega_ext].to_vec(),
            omega_ext,
            upsilon,
            t_hat,
        )?)
    }

    fn zero_filters(&self, y: &mut [f64]) {
        y[self.phi_bar..self.theta].iter_mut().for_each(|v| *v = 0.0);
    }
}

fn raw_matrix(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    m.as_mut_slice().copy_from_slice(data);
    m
}

/// Everything the controller computes from one state sample.
struct Evaluation {
    psi: Vec<f64>,
    r: Vec<f64>,
    omega: Vec<f64>,
    u: Vec<f64>,
    theta_hat: Matrix,
    bank: FilterBank,
    sig: NormalizedSignals,
    z: Matrix,
    delta: f64,
    adj_norm: f64,
    reg: Regression,
}

struct Engine<'a> {
    sc: &'a Scenario,
    lay: Layout,
    adapt: AdaptationGains,
}

impl<'a> Engine<'a> {
    fn evaluate(&self, t: f64, y: &[f64], t_hat: f64) -> Result<Evaluation, SimError> {
        let lay = &self.lay;
        let x = lay.x(y);
        let psi = self.sc.plant.basis.eval(x);
        let r = self.sc.reference.reference(t);
        let omega = regressor_from_psi(x, &r, &psi);
        let theta_hat = lay.theta(y);
        let u = theta_hat.tr_mul_vec(&omega)?;
        let bank = lay.bank(y, t_hat)?;
        let sig = bank.normalized_signals(x, t, self.sc.gains)?;
        let drem = bank.drem_outputs();
        let blocks = slice_z(&drem.z, lay.dims)?;
        let reg = build_regression(&blocks, drem.delta, &self.sc.reference.a_ref, &self.sc.reference.b_ref)?;
        Ok(Evaluation {
            psi,
            r,
            omega,
            u,
            theta_hat,
            bank,
            sig,
            z: drem.z,
            delta: drem.delta,
            adj_norm: drem.adj_norm,
            reg,
        })
    }

    fn rhs(
        &self,
        t: f64,
        y: &[f64],
        dy: &mut [f64],
        seg: usize,
        t_hat: f64,
    ) -> Result<(), SimError> {
        let lay = &self.lay;
        let ev = self.evaluate(t, y, t_hat)?;
        let x = lay.x(y);
        let dx = plant_derivative_with_psi(x, &ev.u, &ev.psi, &self.sc.plant.segments[seg])?;
        let dxr = ref_model_derivative(lay.x_ref(y), &ev.r, &self.sc.reference)?;
        let mut phi = Vec::with_capacity(lay.dims.regressor_len());
        phi.extend_from_slice(x);
        phi.extend_from_slice(&ev.u);
        phi.extend_from_slice(&ev.psi);
        let rates = ev.bank.rates_from_signals(&phi, &ev.sig, t, self.sc.gains);
        let dth = theta_rate(&ev.theta_hat, &ev.reg.y, ev.reg.omega, &ev.omega, &self.adapt);

        dy[lay.x..lay.x + lay.dims.n].copy_from_slice(&dx);
        dy[lay.x_ref..lay.x_ref + lay.dims.n].copy_from_slice(&dxr);
        dy[lay.phi_bar..lay.omega_ext].copy_from_slice(&rates.phi_bar);
        dy[lay.omega_ext..lay.upsilon].copy_from_slice(rates.omega_ext.as_slice());
        dy[lay.upsilon..lay.theta].copy_from_slice(rates.upsilon.as_slice());
        dy[lay.theta..lay.len].copy_from_slice(dth.as_slice());
        Ok(())
    }
}

/// `Θ̄ = [Aᵀ; Bᵀ; ϑBᵀ; x(t̂)ᵀ]`, `q×n`: what `z/Δ` converges to on a clean
/// interval.
pub fn extended_truth(seg: &crate::dynamics::PlantSegment, x_hat: &[f64]) -> Matrix {
    let bt = (&seg.b * &seg.theta_unc.transpose()).transpose();
    let xh = raw_matrix(1, x_hat.len(), x_hat);
    Matrix::vstack(&[&seg.a.transpose(), &seg.b.transpose(), &bt, &xh])
        .expect("segment blocks share the state dimension")
}

struct RunOptions {
    rho: f64,
    detector: bool,
    t_stop: f64,
}

/// Runs the scenario, calibrating `ρ` first when requested. A finite escape
/// is an error.
pub fn run_scenario(sc: &Scenario) -> Result<Telemetry, SimError> {
    let tel = run_scenario_partial(sc)?;
    match tel.escape {
        Some(e) => Err(e.into()),
        None => Ok(tel),
    }
}

/// Like [`run_scenario`], but a finite escape returns the telemetry up to
/// the escape with [`Telemetry::escape`] set.
pub fn run_scenario_partial(sc: &Scenario) -> Result<Telemetry, SimError> {
    sc.validate()?;
    let rho = match sc.rho {
        RhoSetting::Fixed(rho) => rho,
        RhoSetting::Auto { factor, window } => calibrate_rho(sc, factor, window)?,
    };
    simulate(
        sc,
        RunOptions {
            rho,
            detector: true,
            t_stop: sc.t_end,
        },
    )
}

/// Dry run over `[t0, t0 + window]` with the detector off and the estimate
/// frozen; returns `factor · max Ω`.
pub fn calibrate_rho(sc: &Scenario, factor: f64, window: f64) -> Result<f64, SimError> {
    let t_stop = (sc.plant.t0() + window).min(sc.t_end);
    let dry = simulate(
        sc,
        RunOptions {
            rho: f64::INFINITY,
            detector: false,
            t_stop,
        },
    )?;
    if let Some(e) = dry.escape {
        return Err(e.into());
    }
    let max_omega = dry.rows.iter().map(|r| r.omega).fold(0.0, f64::max);
    if !(max_omega > 0.0) {
        return Err(SimError::Config(format!(
            "rho calibration: Ω stayed at zero over the first {window} s"
        )));
    }
    Ok(factor * max_omega)
}

fn simulate(sc: &Scenario, opts: RunOptions) -> Result<Telemetry, SimError> {
    let (dims, truth) = sc.validate()?;
    let lay = Layout::new(dims);
    let engine = Engine {
        sc,
        adapt: AdaptationGains {
            rho: opts.rho,
            gamma0: sc.gamma0,
            gamma1: sc.gamma1,
        },
        lay,
    };
    let lay = &engine.lay;
    let t0 = sc.plant.t0();
    let h = sc.h;
    let switches = sc.plant.switch_times();

    let mut y = vec![0.0; lay.len];
    y[lay.x..lay.x + dims.n].copy_from_slice(&sc.plant.x0);
    y[lay.x_ref..lay.x_ref + dims.n].copy_from_slice(&sc.reference.x0_ref);
    y[lay.theta..lay.len].copy_from_slice(sc.initial_estimate().as_slice());

    let mut t = t0;
    let mut t_hat = t0;
    let mut x_hat = sc.plant.x0.clone();
    let mut detector = DetectorState::new(t0, sc.delta_pr, sc.immediate_reset)?;
    let policy = if opts.detector {
        sc.threshold
    } else {
        ThresholdPolicy::Disabled
    };
    let mut scale = IndicatorScale::default();
    let mut rk = Rk4::new(lay.len);

    let est_rows = ((opts.t_stop - t0) / h).ceil() as usize + switches.len() * 2 + 8;
    let mut rows = Vec::with_capacity(est_rows);
    let mut triggers = Vec::new();
    let mut resets = Vec::new();

    let sample = |t: f64,
                      y: &[f64],
                      t_hat: f64,
                      x_hat: &[f64],
                      reset_flag: bool,
                      detector: &mut DetectorState,
                      scale: &mut IndicatorScale|
     -> Result<(TelemetryRow, DetectorAction), SimError> {
        let ev = engine.evaluate(t, y, t_hat)?;
        let seg_idx = sc.plant.active_segment(t)?;
        let seg = &sc.plant.segments[seg_idx];
        let th = &truth[seg_idx].theta;

        let z_norm = ev.z.frobenius_norm();
        let eps_norm = indicator_norm(ev.delta, &ev.sig.phi_bar_n, &ev.sig.z_bar_n, &ev.z);
        let phi_norm = norm(&ev.sig.phi_bar_n);
        scale.running_max_z = scale.running_max_z.max(z_norm);
        scale.rounding = phi_norm * phi_norm * ev.adj_norm * ev.bank.upsilon.frobenius_norm();
        scale.relative_base = ev.delta.abs() * phi_norm * norm(&ev.sig.z_bar_n);
        detector.eps_threshold = policy.threshold(scale);
        scale.track_quiet(&policy, eps_norm);
        let action = detector.step(eps_norm, t)?;

        let x = lay.x(y);
        let x_ref = lay.x_ref(y);
        let e_ref: Vec<f64> = x.iter().zip(x_ref).map(|(a, b)| a - b).collect();
        let eref_norm = norm(&e_ref);
        let tilde = &ev.theta_hat - th;
        let thetatilde_norm = tilde.frobenius_norm();
        let xi_norm = eref_norm.hypot(thetatilde_norm);

        let om = ev.reg.omega;
        let th_norm = th.frobenius_norm();
        let rel_estimate_error = if om != 0.0 {
            (&ev.reg.y.scale(1.0 / om) - th).frobenius_norm() / th_norm
        } else {
            f64::NAN
        };
        let (z_identity_rel, omega_identity_rel) = if ev.delta != 0.0 {
            let tb = extended_truth(seg, x_hat);
            let zi = (&ev.z.scale(1.0 / ev.delta) - &tb).frobenius_norm() / tb.frobenius_norm();
            let btb = (&seg.b.transpose() * &seg.b).det()?;
            let log_pred = 2.0 * dims.m as f64 * ev.delta.abs().ln() + btb.abs().ln();
            let oi = if om > 0.0 {
                (om.ln() - log_pred).exp_m1().abs()
            } else {
                1.0
            };
            (zi, oi)
        } else {
            (f64::NAN, f64::NAN)
        };

        let eps_relative = eps_norm / scale.relative_base;
        let row = TelemetryRow {
            t,
            x: x.to_vec(),
            x_ref: x_ref.to_vec(),
            u: ev.u,
            theta_hat: ev.theta_hat.as_slice().to_vec(),
            omega: om,
            delta: ev.delta,
            eps_norm,
            eref_norm,
            thetatilde_norm,
            xi_norm,
            seg: seg_idx,
            ihat: detector.counter,
            reset_flag,
            theta_tilde: tilde.into_vec(),
            phi_bar_n: ev.sig.phi_bar_n,
            z_norm,
            eps_threshold: detector.eps_threshold,
            active: engine.adapt.is_active(om),
            t_hat,
            big_y: ev.reg.y.as_slice().to_vec(),
            rel_estimate_error,
            z_identity_rel,
            omega_identity_rel,
            eps_scaled: eps_norm / (1.0 + scale.running_max_z),
            eps_relative,
        };
        Ok((row, action))
    };

    let (row0, _) = sample(t, &y, t_hat, &x_hat, false, &mut detector, &mut scale)?;
    rows.push(row0);

    // events closer than this to a grid point are taken as landing on it
    let snap = 1e-6 * h;
    let mut k: u64 = 0;
    let mut escape = None;
    while t < opts.t_stop - snap {
        let mut t_next = t0 + (k + 1) as f64 * h;
        let mut on_grid = true;
        let mut events: Vec<f64> = switches
            .iter()
            .copied()
            .filter(|&s| s > t + snap)
            .collect();
        if let Some(p) = detector.pending_reset {
            events.push(p);
        }
        events.push(opts.t_stop);
        if let Some(&ev) = events.iter().min_by(|a, b| a.total_cmp(b)) {
            if ev <= t_next + snap {
                if (ev - t_next).abs() > snap {
                    on_grid = false;
                }
                t_next = ev;
            }
        }
        let seg = sc.plant.active_segment(t)?;
        let step = t_next - t;
        rk.step(t, &mut y, step, |ts, ys, dys| engine.rhs(ts, ys, dys, seg, t_hat))?;
        t = t_next;
        if on_grid {
            k += 1;
        }

        let x_norm = norm(lay.x(&y));
        if !y.iter().all(|v| v.is_finite()) || x_norm > sc.x_max {
            escape = Some(Escape {
                t,
                x_norm,
                segment: seg,
            });
            break;
        }

        let mut reset_flag = false;
        if let Some(p) = detector.pending_reset {
            if (p - t).abs() <= snap {
                lay.zero_filters(&mut y);
                t_hat = t;
                x_hat = lay.x(&y).to_vec();
                detector.clear_pending();
                scale.quiet_steps = 0;
                resets.push(t);
                reset_flag = true;
            }
        }
        let (row, action) = sample(t, &y, t_hat, &x_hat, reset_flag, &mut detector, &mut scale)?;
        rows.push(row);
        if let DetectorAction::ScheduleReset(p) = action {
            triggers.push(t);
            if (p - t).abs() <= snap {
                lay.zero_filters(&mut y);
                t_hat = t;
                x_hat = lay.x(&y).to_vec();
                detector.clear_pending();
                scale.quiet_steps = 0;
                resets.push(t);
                if let Some(last) = rows.last_mut() {
                    last.reset_flag = true;
                }
            }
        }
    }

    Ok(Telemetry {
        name: sc.name.clone(),
        dims,
        h,
        t0,
        t_end: opts.t_stop,
        rho: opts.rho,
        delta_pr: sc.delta_pr,
        switch_times: switches,
        truth,
        rows,
        triggers,
        resets,
        escape,
    })
}
