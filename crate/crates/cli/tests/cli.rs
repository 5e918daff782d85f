//! End-to-end runs of the `mrac` binary on shortened copies of the shipped
//! configs (h = 1e-3).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Copies `configs/<name>.toml` into `dir` with a coarser step and an
/// optional shorter horizon.
fn short_config(dir: &Path, name: &str, t_end: Option<f64>) -> PathBuf {
    let src = fs::read_to_string(configs_dir().join(format!("{name}.toml"))).unwrap();
    let mut out = String::new();
    for line in src.lines() {
        if line.starts_with("h = ") {
            out.push_str("h = 1e-3");
        } else if let (true, Some(t)) = (line.starts_with("t_end = "), t_end) {
            out.push_str(&format!("t_end = {t:?}"));
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    assert!(out.contains("h = 1e-3\n"), "{name} has no step line");
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, out).unwrap();
    path
}

fn mrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrac")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_decimated_csv_and_plots() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path(), "no_switch", Some(2.0));
    let csv = tmp.path().join("out/run.csv");
    let svg = tmp.path().join("plots");
    let o = mrac(&["run", "--config", s(&cfg), "--out", s(&csv), "--svg", s(&svg), "--decimate", "10"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("2001 rows"));

    let body = fs::read_to_string(&csv).unwrap();
    let mut lines = body.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 28);
    assert_eq!(header[0], "t");
    assert_eq!(*header.last().unwrap(), "reset_flag");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r.len() == 28));
    assert!((rows[1][0] - 0.01).abs() < 1e-12);
    assert!((rows[200][0] - 2.0).abs() < 1e-12);

    for f in ["eref_norm.svg", "thetatilde_norm.svg", "omega.svg"] {
        let p = fs::read_to_string(svg.join(f)).unwrap();
        assert!(p.starts_with("<svg") && p.contains("<polyline"), "{f}");
    }
}

#[test]
fn broken_config_exits_1_without_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("broken.toml");
    fs::write(&cfg, "[plant]\nx0 = [1.0]\n").unwrap();
    let csv = tmp.path().join("never.csv");
    let o = mrac(&["run", "--config", s(&cfg), "--out", s(&csv)]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("segments"), "{}", text(&o.stderr));
    assert!(!csv.exists());

    let o = mrac(&["verify", "--config", s(&tmp.path().join("missing.toml"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn divergent_run_exits_2_with_partial_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path(), "detector_disabled", Some(7.0));
    let csv = tmp.path().join("div.csv");
    let o = mrac(&["run", "--config", s(&cfg), "--out", s(&csv), "--decimate", "1"]);
    assert_eq!(code(&o), 2);
    let err = text(&o.stderr);
    assert!(err.contains("finite escape at t = 5.6"), "{err}");

    let body = fs::read_to_string(&csv).unwrap();
    let last_t: f64 = body.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(last_t > 5.0 && last_t < 7.0, "{last_t}");

    let o = mrac(&["verify", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("[FAIL] bounded"));
}

#[test]
fn verify_without_switches_reports_one_window() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path(), "no_switch", None);
    let o = mrac(&["verify", "--config", s(&cfg)]);
    let out = text(&o.stdout) + &text(&o.stderr);
    assert!(out.contains("window 0 ["));
    assert!(!out.contains("window 1"));
    assert!(out.contains("[PASS] trigger count: 0 triggers"));
    assert!(out.contains("[PASS] window 0: decay rate"));
    assert!(out.contains("[PASS] window 0: residual"));
    // The estimate error is not monotone while the regression is settling,
    // so the verdict is a check failure rather than a pass.
    let failed: Vec<&str> = out.lines().filter(|l| l.starts_with("[FAIL]")).collect();
    assert_eq!(failed.len(), 1, "{out}");
    assert!(failed[0].contains("monotonicity"));
    assert_eq!(code(&o), 3);
}

#[test]
fn verify_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path(), "canonical_immediate", Some(6.0));
    let a = mrac(&["verify", "--config", s(&cfg)]);
    let b = mrac(&["verify", "--config", s(&cfg)]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    assert_eq!(code(&a), code(&b));
    let out = text(&a.stdout) + &text(&a.stderr);
    assert!(out.contains("[PASS] trigger after switch 5"), "{out}");
}

#[test]
fn sweep_merges_reports_in_name_order() {
    let tmp = TempDir::new().unwrap();
    let cfgs = tmp.path().join("cfgs");
    fs::create_dir(&cfgs).unwrap();
    let a = short_config(&cfgs, "no_switch", Some(1.5));
    fs::rename(&a, cfgs.join("b_quiet.toml")).unwrap();
    let d = short_config(&cfgs, "detector_disabled", Some(7.0));
    fs::rename(&d, cfgs.join("a_divergent.toml")).unwrap();
    fs::write(cfgs.join("notes.txt"), "ignored").unwrap();

    let out = tmp.path().join("sweep");
    let o = mrac(&["sweep", "--dir", s(&cfgs), "--out", s(&out), "--jobs", "2"]);
    assert_eq!(code(&o), 2, "escape outranks a failed check");
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let a_pos = summary.find("a_divergent.toml (exit 2)").expect("a listed");
    let b_pos = summary.find("b_quiet.toml (exit 3)").expect("b listed");
    assert!(a_pos < b_pos);
    assert!(out.join("a_divergent.csv").exists());
    assert!(out.join("b_quiet.csv").exists());

    let serial = tmp.path().join("serial");
    let o1 = mrac(&["sweep", "--dir", s(&cfgs), "--out", s(&serial), "--jobs", "1"]);
    assert_eq!(code(&o1), 2);
    let one = fs::read_to_string(serial.join("summary.txt")).unwrap();
    assert_eq!(one.replace(s(&serial), ""), summary.replace(s(&out), ""));
}

#[test]
fn run_falls_back_to_configured_csv_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path(), "no_switch", Some(0.5));
    let o = mrac(&["run", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("no --out"));

    let csv = tmp.path().join("from_config.csv");
    let body = fs::read_to_string(&cfg).unwrap() + &format!("\n[output]\ncsv = {:?}\ndecimation = 50\n", s(&csv));
    fs::write(&cfg, body).unwrap();
    let o = mrac(&["run", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 11);
}
