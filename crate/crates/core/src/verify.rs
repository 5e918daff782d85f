//! Scenario-level pass/fail checks built on [`crate::metrics`].

use std::fmt;

use crate::config::VerifyConfig;
use crate::engine::Telemetry;
use crate::metrics::{window_report, windows, WindowReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub name: String,
    pub rho: f64,
    pub windows: Vec<WindowReport>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(name: impl Into<String>, pass: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        pass,
        detail,
    }
}

pub fn verify(tel: &Telemetry, cfg: &VerifyConfig) -> VerifyReport {
    let ws = windows(tel, cfg.sustain_steps, cfg.settle_steps);
    let reports: Vec<WindowReport> = ws
        .iter()
        .map(|w| window_report(tel, w, cfg.monotonicity_slack))
        .collect();
    let mut checks = Vec::new();

    checks.push(match tel.escape {
        Some(e) => check(
            "bounded",
            false,
            format!("escape at t = {} with |x| = {:e}", e.t, e.x_norm),
        ),
        None => check("bounded", true, format!("reached t = {}", tel.t_end)),
    });

    let in_horizon: Vec<f64> = tel.switch_times.iter().copied().filter(|&s| s < tel.t_end).collect();
    let expected = cfg.expected_triggers.unwrap_or(in_horizon.len());
    checks.push(check(
        "trigger count",
        tel.triggers.len() == expected,
        format!("{} triggers {:?}, expected {expected}", tel.triggers.len(), tel.triggers),
    ));
    let slack = cfg.trigger_slack_steps * tel.h;
    for &s in &in_horizon {
        let hit = tel.triggers.iter().find(|&&t| t >= s && t <= s + slack + 1e-9 * tel.h);
        checks.push(check(
            format!("trigger after switch {s}"),
            hit.is_some(),
            match hit {
                Some(t) => format!("trigger at {t}, delay {:.3e} s", t - s),
                None => format!("none within {slack:e} s"),
            },
        ));
    }

    for r in &reports {
        let tag = format!("window {}", r.index);
        if r.active_start.is_none() {
            checks.push(check(
                format!("{tag}: active"),
                false,
                format!("Omega never exceeded rho = {:e} for {} steps", tel.rho, cfg.sustain_steps),
            ));
            continue;
        }
        checks.push(check(
            format!("{tag}: residual"),
            r.max_residual <= cfg.residual_tol,
            format!("max {:.3e} vs {:e}", r.max_residual, cfg.residual_tol),
        ));
        let mono = r.monotonicity.expect("active window has a monotonicity scan");
        checks.push(check(
            format!("{tag}: monotonicity"),
            mono.violations == 0,
            format!("{} violations, max step increase {:.3e}", mono.violations, mono.max_increase),
        ));
        let c2 = r.fit.map_or(f64::NAN, |f| f.c2);
        checks.push(check(
            format!("{tag}: decay rate"),
            c2 > cfg.c2_min,
            format!("c2 = {c2:.4e} vs {}", cfg.c2_min),
        ));
        checks.push(check(
            format!("{tag}: decay ratio"),
            r.decay_ratio <= cfg.decay_ratio_max,
            format!("{:.3e} vs {}", r.decay_ratio, cfg.decay_ratio_max),
        ));
    }

    VerifyReport {
        name: tel.name.clone(),
        rho: tel.rho,
        windows: reports,
        checks,
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {} (rho = {:e})", self.name, self.rho)?;
        for w in &self.windows {
            writeln!(f, "{w}")?;
        }
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {}", c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}
