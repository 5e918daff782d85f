//! CSV and SVG writers for telemetry.
//!
//! CSV columns, in order:
//!
//! ```text
//! t, x1..xn, xref1..xrefn, u1..um, that_11..that_{(n+m+p)m},
//! Omega, Delta, eps_norm, eref_norm, thetatilde_norm, xi_norm, seg, ihat, reset_flag
//! ```
//!
//! `that_ij` is row `i`, column `j` of `θ̂`. Floats carry 17 significant
//! digits; `reset_flag` is 0 or 1.

use std::fmt::Write as _;
use std::io::{self, Write};

use mrac_core::engine::{Telemetry, TelemetryRow};

pub fn csv_header(tel: &Telemetry) -> Vec<String> {
    let d = tel.dims;
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=d.n).map(|i| format!("x{i}")));
    cols.extend((1..=d.n).map(|i| format!("xref{i}")));
    cols.extend((1..=d.m).map(|i| format!("u{i}")));
    for i in 1..=d.regressor_len() {
        cols.extend((1..=d.m).map(|j| format!("that_{i}{j}")));
    }
    for c in [
        "Omega",
        "Delta",
        "eps_norm",
        "eref_norm",
        "thetatilde_norm",
        "xi_norm",
        "seg",
        "ihat",
        "reset_flag",
    ] {
        cols.push(c.to_string());
    }
    cols
}

fn push_f64(line: &mut String, v: f64) {
    line.push(',');
    let _ = write!(line, "{v:.16e}");
}

fn csv_line(r: &TelemetryRow, line: &mut String) {
    line.clear();
    let _ = write!(line, "{:.16e}", r.t);
    for v in r.x.iter().chain(&r.x_ref).chain(&r.u).chain(&r.theta_hat) {
        push_f64(line, *v);
    }
    for v in [
        r.omega,
        r.delta,
        r.eps_norm,
        r.eref_norm,
        r.thetatilde_norm,
        r.xi_norm,
    ] {
        push_f64(line, v);
    }
    let _ = write!(line, ",{},{},{}", r.seg, r.ihat, u8::from(r.reset_flag));
    line.push('\n');
}

/// Rows kept at decimation `every`: every `every`-th row plus every row
/// that carries a reset.
pub fn decimated(tel: &Telemetry, every: usize) -> impl Iterator<Item = &TelemetryRow> {
    let every = every.max(1);
    tel.rows
        .iter()
        .enumerate()
        .filter(move |(i, r)| i % every == 0 || r.reset_flag)
        .map(|(_, r)| r)
}

pub fn write_csv<W: Write>(tel: &Telemetry, every: usize, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", csv_header(tel).join(","))?;
    let mut line = String::with_capacity(512);
    for r in decimated(tel, every) {
        csv_line(r, &mut line);
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

/// One plotted quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plot {
    ErefNorm,
    ThetaTildeNorm,
    Omega,
}

impl Plot {
    pub const ALL: [Plot; 3] = [Plot::ErefNorm, Plot::ThetaTildeNorm, Plot::Omega];

    pub fn file_name(self) -> &'static str {
        match self {
            Plot::ErefNorm => "eref_norm.svg",
            Plot::ThetaTildeNorm => "thetatilde_norm.svg",
            Plot::Omega => "omega.svg",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Plot::ErefNorm => "log10 |e_ref|",
            Plot::ThetaTildeNorm => "log10 |vec(theta_tilde)|",
            Plot::Omega => "log10 Omega",
        }
    }

    fn value(self, r: &TelemetryRow) -> f64 {
        match self {
            Plot::ErefNorm => r.eref_norm,
            Plot::ThetaTildeNorm => r.thetatilde_norm,
            Plot::Omega => r.omega,
        }
    }
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 4000;

/// Line plot of `log10` of the quantity against time, with dashed red
/// lines at filter resets and dotted grey lines at true switches.
/// Non-positive values are left out of the polyline.
pub fn svg_plot(tel: &Telemetry, plot: Plot) -> String {
    let stride = (tel.rows.len() / MAX_POINTS).max(1);
    let pts: Vec<(f64, f64)> = tel
        .rows
        .iter()
        .step_by(stride)
        .filter_map(|r| {
            let v = plot.value(r);
            (v > 0.0 && v.is_finite()).then(|| (r.t, v.log10()))
        })
        .collect();
    let t_lo = tel.t0;
    let t_hi = tel.rows.last().map_or(tel.t_end, |r| r.t).max(t_lo + f64::EPSILON);
    let (mut y_lo, mut y_hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if !(y_lo.is_finite() && y_hi.is_finite()) {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let sx = |t: f64| MARGIN + (t - t_lo) / (t_hi - t_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14">{} ({})</text>"#,
        MARGIN,
        plot.title(),
        xml_escape(&tel.name)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" fill="none" stroke="black"/>"#
    );
    for (v, y) in [(y_hi, y0), (y_lo, y1)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.1}</text>"#,
            x0 - 4.0,
            y + 4.0
        );
    }
    for (t, x) in [(t_lo, x0), (t_hi, x1)] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{t:.2} s</text>"#,
            y1 + 16.0
        );
    }
    for &t in tel.switch_times.iter().filter(|&&t| t <= t_hi) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="grey" stroke-dasharray="2,3"/>"#
        );
    }
    for &t in &tel.resets {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="red" stroke-dasharray="6,4"/>"#
        );
    }
    s.push_str(r#"<polyline fill="none" stroke="steelblue" stroke-width="1.2" points=""#);
    for (t, v) in &pts {
        let _ = write!(s, "{:.2},{:.2} ", sx(*t), sy(*v));
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mrac_core::config::{parse_config, CANONICAL};
    use mrac_core::engine::{run_scenario, RhoSetting};

    fn short_run() -> Telemetry {
        let mut sc = parse_config(CANONICAL).unwrap().scenario;
        sc.h = 1e-2;
        sc.t_end = 0.5;
        sc.rho = RhoSetting::Fixed(1e300);
        run_scenario(&sc).unwrap()
    }

    #[test]
    fn header_layout() {
        let tel = short_run();
        let h = csv_header(&tel);
        assert_eq!(h.len(), 1 + 2 + 2 + 2 + 12 + 9);
        assert_eq!(&h[..4], ["t", "x1", "x2", "xref1"]);
        assert_eq!(h[7], "that_11");
        assert_eq!(h[8], "that_12");
        assert_eq!(h[18], "that_62");
        assert_eq!(h[19], "Omega");
        assert_eq!(h.last().unwrap(), "reset_flag");
    }

    #[test]
    fn csv_round_trips_and_decimates() {
        let tel = short_run();
        let mut buf = Vec::new();
        write_csv(&tel, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), tel.rows.len() + 1);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        for (line, r) in lines[1..].iter().zip(&tel.rows) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 28);
            assert_eq!(f[0].parse::<f64>().unwrap(), r.t);
            assert_eq!(f[1].parse::<f64>().unwrap(), r.x[0]);
            assert_eq!(f[7].parse::<f64>().unwrap(), r.theta_hat[0]);
            assert_eq!(f[19].parse::<f64>().unwrap(), r.omega);
            assert_eq!(f[24].parse::<f64>().unwrap(), r.xi_norm);
            assert_eq!(f[27], if r.reset_flag { "1" } else { "0" });
        }
        let mut buf = Vec::new();
        write_csv(&tel, 10, &mut buf).unwrap();
        let n = String::from_utf8(buf).unwrap().lines().count();
        assert_eq!(n, 1 + tel.rows.len().div_ceil(10));
    }

    #[test]
    fn svg_has_polyline() {
        let tel = short_run();
        for p in Plot::ALL {
            let s = svg_plot(&tel, p);
            assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
            assert!(s.contains("<polyline"));
        }
    }
}
