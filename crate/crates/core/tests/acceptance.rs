//! Acceptance suite for the canonical two-switch scenario plus the kernel,
//! integrator and ablation checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p mrac-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mrac_core::adaptation::{theta_rate, AdaptationGains};
use mrac_core::config::{parse_config, ScenarioConfig, CANONICAL};
use mrac_core::detector::ThresholdPolicy;
use mrac_core::engine::{run_scenario_partial, RhoSetting, Telemetry};
use mrac_core::integrator::Rk4;
use mrac_core::matrix::{dot, norm};
use mrac_core::metrics::{
    check_monotonicity, fit_decay_rows, nan_max, regression_residual, windows, Window,
};
use mrac_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUSTAIN: usize = 10;
const SETTLE: usize = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn canonical() -> ScenarioConfig {
    parse_config(CANONICAL).expect("bundled canonical config parses")
}

fn truncation_note(tel: &Telemetry, w: &Window) -> Option<String> {
    w.truncated.then(|| {
        let e = tel.escape.expect("truncated windows come from an escape");
        format!(
            "window {} truncated: finite escape at t = {:.4} (|x| = {:.3e})",
            w.index, e.t, e.x_norm
        )
    })
}

fn criterion_1(tel: &Telemetry, elapsed: Duration) -> Verdict {
    let h = tel.h;
    let mut ok = tel.triggers.len() == 2;
    let mut notes = vec![format!("triggers {:?}, resets {:?}", tel.triggers, tel.resets)];
    for (k, &s) in [5.0, 10.0].iter().enumerate() {
        match tel.triggers.get(k) {
            Some(&t) if t >= s && t <= s + 5.0 * h + 1e-9 * h => {}
            _ => {
                ok = false;
                notes.push(format!("no trigger in [{s}, {s}+5h]"));
            }
        }
    }
    let resets_ok = tel.resets.len() == tel.triggers.len()
        && tel
            .triggers
            .iter()
            .zip(&tel.resets)
            .all(|(t, r)| (r - (t + 0.1)).abs() <= 1e-9);
    if !resets_ok {
        ok = false;
        notes.push("resets not at trigger + 0.1 s".into());
    }
    if let Some(e) = tel.escape {
        ok = false;
        notes.push(format!(
            "run aborted at t = {:.4} by the divergence guard, trigger count over [0, 15] unverified",
            e.t
        ));
    }
    let secs = elapsed.as_secs_f64();
    if secs >= 30.0 {
        ok = false;
    }
    notes.push(format!("runtime {secs:.1} s"));
    verdict(ok, notes.join("; "))
}

fn criterion_2(tel: &Telemetry, ws: &[Window]) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    let negative = tel.rows.iter().filter(|r| !(r.omega >= 0.0)).count();
    if negative > 0 {
        ok = false;
        notes.push(format!("{negative} samples with Omega < 0 or NaN"));
    }
    for w in ws {
        if let Some(n) = truncation_note(tel, w) {
            ok = false;
            notes.push(n);
            continue;
        }
        match &w.active {
            None => {
                ok = false;
                notes.push(format!("window {}: Omega never exceeded rho", w.index));
            }
            Some(a) => {
                let drops = tel.rows[a.clone()].iter().filter(|r| !r.active).count();
                if drops > 0 {
                    ok = false;
                }
                notes.push(format!(
                    "window {}: above rho from {:.4}, {drops} later drops",
                    w.index, tel.rows[a.start].t
                ));
            }
        }
    }
    verdict(ok, notes.join("; "))
}

fn criterion_3(tel: &Telemetry, ws: &[Window]) -> Verdict {
    let k = &tel.truth[0];
    let kx = Matrix::from_rows(&[[2.5, 1.25], [-3.75, -1.25]]);
    let kr = Matrix::from_rows(&[[5.0, -5.0], [0.0, 5.0]]);
    let oracle_err = (&k.k_x - &kx).max_abs().max((&k.k_r - &kr).max_abs());
    let mut ok = oracle_err < 1e-12;
    let mut notes = vec![format!("K0 oracle error {oracle_err:.1e}")];
    for w in ws {
        if let Some(n) = truncation_note(tel, w) {
            ok = false;
            notes.push(n);
            continue;
        }
        let res = regression_residual(tel, w.clean.clone(), &tel.truth[w.segment]);
        if !(res <= 1e-3) {
            ok = false;
        }
        notes.push(format!("window {}: max {res:.2e}", w.index));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_4(tel: &Telemetry, ws: &[Window]) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for w in ws {
        if let Some(n) = truncation_note(tel, w) {
            ok = false;
            notes.push(n);
            continue;
        }
        let Some(a) = w.active.clone() else {
            ok = false;
            notes.push(format!("window {}: no active window", w.index));
            continue;
        };
        let truth = &tel.truth[w.segment];
        let m = check_monotonicity(tel, a.clone(), truth, 1e-9);
        if m.components != 12 || m.violations > 0 {
            ok = false;
        }
        // where the first violation-free stretch begins, for the record
        let consistent = a
            .clone()
            .find(|&i| tel.rows[i].rel_estimate_error < 1e-6)
            .unwrap_or(a.end);
        let late = check_monotonicity(tel, consistent..a.end, truth, 1e-9);
        notes.push(format!(
            "window {}: {} violations (max step increase {:.2e}); {} of them after |Y/Omega - theta|/|theta| < 1e-6 at t = {:.4}",
            w.index,
            m.violations,
            m.max_increase,
            late.violations,
            tel.rows.get(consistent).map_or(f64::NAN, |r| r.t)
        ));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_5(tel: &Telemetry, ws: &[Window]) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for w in ws {
        if let Some(n) = truncation_note(tel, w) {
            ok = false;
            notes.push(n);
            continue;
        }
        let Some(a) = w.active.clone() else {
            ok = false;
            notes.push(format!("window {}: no active window", w.index));
            continue;
        };
        let c2 = fit_decay_rows(tel, a.clone()).map_or(f64::NAN, |f| f.c2);
        let ratio = tel.rows[a.end - 1].xi_norm / tel.rows[a.start].xi_norm;
        if !(c2 > 0.1 && ratio <= 0.05) {
            ok = false;
        }
        notes.push(format!("window {}: c2 = {c2:.3} 1/s, end/start = {ratio:.2e}", w.index));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_6(tel: &Telemetry, ws: &[Window]) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for w in ws {
        if let Some(n) = truncation_note(tel, w) {
            ok = false;
            notes.push(n);
            continue;
        }
        let rows = &tel.rows[w.clean.clone()];
        let z_max = nan_max(rows.iter().map(|r| r.z_norm));
        let eps = nan_max(rows.iter().map(|r| r.eps_norm / (1.0 + z_max)));
        let zi = nan_max(rows.iter().map(|r| r.z_identity_rel));
        let oi = nan_max(rows.iter().map(|r| r.omega_identity_rel));
        let pass = eps <= 1e-8 && zi <= 1e-6 && oi <= 1e-6;
        ok &= pass;
        // first instant after which both identities hold to the end of the window
        let holds_from = (0..rows.len())
            .rev()
            .take_while(|&i| rows[i].z_identity_rel <= 1e-6 && rows[i].omega_identity_rel <= 1e-6)
            .last()
            .map_or(f64::NAN, |i| rows[i].t);
        notes.push(format!(
            "window {}: eps/(1+max|z|) {eps:.1e}, z identity {zi:.1e}, Omega identity {oi:.1e} (both within 1e-6 from t = {holds_from:.4})",
            w.index
        ));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_adj: f64 = 0.0;
    let mut worst_gram: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let m = Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("finite entries");
        let (adj, det) = m.adjugate_with_det().expect("square");
        let scale = (adj.frobenius_norm() * m.frobenius_norm() + det.abs()).max(f64::MIN_POSITIVE);
        for prod in [&adj * &m, &m * &adj] {
            worst_adj = worst_adj.max((&prod - &Matrix::identity(n).scale(det)).max_abs() / scale);
        }
        let gram = (&m.transpose() * &m).det().expect("square");
        let hadamard: f64 = (0..n).map(|i| norm(m.row(i))).product();
        worst_gram = worst_gram.max((gram - det * det).abs() / (hadamard * hadamard).max(f64::MIN_POSITIVE));
    }
    let mut worst_eig: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=12);
        let w: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let (_, hi) = Matrix::outer(&w, &w).sym_eig_extremes().expect("symmetric");
        let n2 = dot(&w, &w);
        worst_eig = worst_eig.max((hi - n2).abs() / n2.max(f64::MIN_POSITIVE));
    }
    verdict(
        worst_adj <= 1e-9 && worst_gram <= 1e-9 && worst_eig <= 1e-10,
        format!(
            "adj(M)M = det(M)I worst {worst_adj:.1e}, det(MtM) = det(M)^2 worst {worst_gram:.1e}, lambda_max = |w|^2 worst {worst_eig:.1e}"
        ),
    )
}

fn criterion_8() -> Verdict {
    // x'' + 2x' + 4x = 0, x(0) = 1, x'(0) = 0: x(t) = e^{-t}(cos √3t + sin √3t / √3)
    let err = |h: f64| {
        let steps = (2.0 / h).round() as usize;
        let mut y = [1.0, 0.0];
        let mut rk = Rk4::new(2);
        for k in 0..steps {
            rk.step(k as f64 * h, &mut y, h, |_, y, dy: &mut [f64]| -> Result<(), ()> {
                dy[0] = y[1];
                dy[1] = -4.0 * y[0] - 2.0 * y[1];
                Ok(())
            })
            .expect("infallible");
        }
        let b = 3f64.sqrt();
        (y[0] - (-2.0f64).exp() * ((2.0 * b).cos() + (2.0 * b).sin() / b)).abs()
    };
    let ratios: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&h| err(h) / err(h / 2.0)).collect();
    let order_ok = ratios.iter().all(|r| (r - 16.0).abs() <= 2.0);

    let mut sc = canonical().scenario;
    sc.h = 1e-3;
    sc.t_end = 0.5;
    sc.rho = RhoSetting::Fixed(f64::MAX);
    let tel = run_scenario_partial(&sc).expect("valid scenario");
    let th0: Vec<u64> = sc.initial_estimate().as_slice().iter().map(|v| v.to_bits()).collect();
    let frozen_run = tel
        .rows
        .iter()
        .all(|r| r.theta_hat.iter().map(|v| v.to_bits()).eq(th0.iter().copied()));

    let g = AdaptationGains {
        rho: 1.0,
        gamma0: 1.0,
        gamma1: 1.0,
    };
    let th = Matrix::from_row_major(6, 2, (0..12).map(|k| 0.37 * k as f64 - 1.1).collect()).expect("12 entries");
    let y = th.scale(-3.0);
    let mut state = th.as_slice().to_vec();
    Rk4::new(12)
        .step(0.0, &mut state, 1e-4, |_, s, ds| -> Result<(), ()> {
            let cur = Matrix::from_row_major(6, 2, s.to_vec()).expect("12 entries");
            ds.copy_from_slice(theta_rate(&cur, &y, 0.999, &[1.0; 6], &g).as_slice());
            Ok(())
        })
        .expect("infallible");
    let frozen_step = state.iter().zip(th.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());

    verdict(
        order_ok && frozen_run && frozen_step,
        format!(
            "error ratios under halving {:.2?}; dead zone bit-exact over a run: {frozen_run}, over a step: {frozen_step}",
            ratios
        ),
    )
}

fn criterion_9(ablation: &Telemetry) -> Verdict {
    let ws = windows(ablation, SUSTAIN, SETTLE);
    let after: Vec<&Window> = ws.iter().filter(|w| w.start >= 5.0).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_rel = f64::NEG_INFINITY;
    for w in &after {
        worst = worst.max(regression_residual(ablation, w.clean.clone(), &ablation.truth[w.segment]));
        worst_rel = worst_rel.max(nan_max(
            ablation.rows[w.clean.clone()].iter().map(|r| r.rel_estimate_error).filter(|v| !v.is_nan()),
        ));
    }
    let escape = ablation
        .escape
        .map_or(String::new(), |e| format!(", run escaped at t = {:.4}", e.t));
    verdict(
        worst > 1e-1,
        format!(
            "detector disabled: triggers {:?}, max normalized residual after 5 s {worst:.2e}; scale-free |Y/Omega - theta|/|theta| reaches {worst_rel:.2e}{escape}",
            ablation.triggers
        ),
    )
}

fn summary_line(label: &str, tel: &Telemetry) -> String {
    let ws = windows(tel, SUSTAIN, SETTLE);
    let parts: Vec<String> = ws
        .iter()
        .map(|w| {
            let last = tel.rows[w.rows.clone()].last();
            format!(
                "window {} |theta_tilde| at end {:.2e}",
                w.index,
                last.map_or(f64::NAN, |r| r.thetatilde_norm)
            )
        })
        .collect();
    let escape = tel.escape.map_or("completed".to_string(), |e| format!("escaped at t = {:.4}", e.t));
    format!(
        "{label}: rho = {:.3e}, triggers {:?}, resets {:?}, {escape}; {}",
        tel.rho,
        tel.triggers,
        tel.resets,
        parts.join(", ")
    )
}

fn main() -> ExitCode {
    let cfg = canonical();
    let start = Instant::now();
    let tel = run_scenario_partial(&cfg.scenario).expect("canonical scenario is valid");
    let elapsed = start.elapsed();
    let ws = windows(&tel, SUSTAIN, SETTLE);

    let mut ablation = cfg.scenario.clone();
    ablation.name = "canonical-no-detector".into();
    ablation.threshold = ThresholdPolicy::Disabled;
    ablation.rho = RhoSetting::Fixed(tel.rho);
    let ablation = run_scenario_partial(&ablation).expect("ablation scenario is valid");

    let results = [
        ("1 switch detection", criterion_1(&tel, elapsed)),
        ("2 regressor positivity", criterion_2(&tel, &ws)),
        ("3 regression consistency", criterion_3(&tel, &ws)),
        ("4 componentwise monotonicity", criterion_4(&tel, &ws)),
        ("5 exponential decay", criterion_5(&tel, &ws)),
        ("6 extension identities", criterion_6(&tel, &ws)),
        ("7 kernel properties", criterion_7()),
        ("8 integrator order and dead-zone freeze", criterion_8()),
        ("9 detector ablation", criterion_9(&ablation)),
    ];

    let mut immediate = cfg.scenario.clone();
    immediate.name = "canonical-immediate-reset".into();
    immediate.immediate_reset = true;
    let immediate = run_scenario_partial(&immediate).expect("variant scenario is valid");

    println!("acceptance: canonical scenario, h = {}, rho = {:.3e}", tel.h, tel.rho);
    let mut failed = 0;
    for (name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {name}: {}", v.detail);
        failed += usize::from(!v.pass);
    }
    println!("info: {}", summary_line("canonical", &tel));
    println!("info: {}", summary_line("immediate-reset variant", &immediate));
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
