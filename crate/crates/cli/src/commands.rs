//! `run`, `verify` and `sweep`. Each command returns an exit code and the
//! text it would print; `main` only does the printing.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use mrac_core::config::{parse_config, ScenarioConfig};
use mrac_core::engine::{run_scenario_partial, Telemetry};
use mrac_core::verify::verify;

use crate::export::{svg_plot, write_csv, Plot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ESCAPE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub report: String,
}

impl Outcome {
    fn new(code: i32, report: String) -> Self {
        Self { code, report }
    }
}

pub fn load(path: &Path) -> Result<ScenarioConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs the scenario; config-level failures map to exit 1.
fn simulate(cfg: &ScenarioConfig) -> Result<Telemetry, String> {
    run_scenario_partial(&cfg.scenario).map_err(|e| format!("{}: {e}", cfg.scenario.name))
}

fn escape_line(tel: &Telemetry) -> Option<String> {
    tel.escape.map(|e| {
        format!(
            "finite escape at t = {} (segment {}, |x| = {:e})",
            e.t, e.segment, e.x_norm
        )
    })
}

fn write_outputs(
    tel: &Telemetry,
    out: &Path,
    decimate: usize,
    svg_dir: Option<&Path>,
) -> anyhow::Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(tel, decimate, BufWriter::new(file)).with_context(|| format!("writing {}", out.display()))?;
    if let Some(dir) = svg_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for p in Plot::ALL {
            let path = dir.join(p.file_name());
            fs::write(&path, svg_plot(tel, p)).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

pub struct RunArgs<'a> {
    pub config: &'a Path,
    /// Falls back to `[output] csv` from the config.
    pub out: Option<&'a Path>,
    pub svg: Option<&'a Path>,
    pub decimate: Option<usize>,
}

pub fn cmd_run(args: RunArgs<'_>) -> Outcome {
    let cfg = match load(args.config) {
        Ok(c) => c,
        Err(e) => return Outcome::new(EXIT_CONFIG, e),
    };
    let out: PathBuf = match (args.out, &cfg.output.csv) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Outcome::new(
                EXIT_CONFIG,
                format!("{}: no --out given and no [output] csv", args.config.display()),
            )
        }
    };
    let tel = match simulate(&cfg) {
        Ok(t) => t,
        Err(e) => return Outcome::new(EXIT_CONFIG, e),
    };
    let decimate = args.decimate.unwrap_or(cfg.output.decimation).max(1);
    let svg_dir: Option<PathBuf> = args.svg.map(Path::to_path_buf).or_else(|| {
        cfg.output
            .svg
            .then(|| out.parent().unwrap_or(Path::new(".")).to_path_buf())
    });
    if let Err(e) = write_outputs(&tel, &out, decimate, svg_dir.as_deref()) {
        return Outcome::new(EXIT_CONFIG, format!("{e:#}"));
    }
    let mut report = format!(
        "{}: {} rows, rho = {:e}, triggers {:?}, resets {:?}",
        tel.name,
        tel.rows.len(),
        tel.rho,
        tel.triggers,
        tel.resets
    );
    match escape_line(&tel) {
        Some(line) => {
            let _ = write!(report, "\n{line}");
            Outcome::new(EXIT_ESCAPE, report)
        }
        None => Outcome::new(EXIT_OK, report),
    }
}

fn verify_loaded(cfg: &ScenarioConfig) -> Outcome {
    let tel = match simulate(cfg) {
        Ok(t) => t,
        Err(e) => return Outcome::new(EXIT_CONFIG, e),
    };
    let rep = verify(&tel, &cfg.verify);
    Outcome::new(verdict(&tel, rep.passed()), rep.to_string())
}

fn verdict(tel: &Telemetry, passed: bool) -> i32 {
    if tel.escape.is_some() {
        EXIT_ESCAPE
    } else if passed {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

pub fn cmd_verify(config: &Path) -> Outcome {
    match load(config) {
        Ok(cfg) => verify_loaded(&cfg),
        Err(e) => Outcome::new(EXIT_CONFIG, e),
    }
}

/// Runs every `*.toml` in `dir` on `jobs` worker threads. Each scenario gets
/// `<out>/<stem>.csv` and a verification report; reports are merged in file
/// name order and written to `<out>/summary.txt`. The exit code is the most
/// severe individual code, see [`severity`].
pub fn cmd_sweep(dir: &Path, out: &Path, jobs: usize) -> Outcome {
    let mut configs: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect(),
        Err(e) => return Outcome::new(EXIT_CONFIG, format!("{}: {e}", dir.display())),
    };
    configs.sort();
    if configs.is_empty() {
        return Outcome::new(EXIT_CONFIG, format!("{}: no .toml configs", dir.display()));
    }
    if let Err(e) = fs::create_dir_all(out) {
        return Outcome::new(EXIT_CONFIG, format!("{}: {e}", out.display()));
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Outcome>>> = Mutex::new(vec![None; configs.len()]);
    let workers = jobs.clamp(1, configs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = configs.get(i) else { break };
                let res = sweep_one(path, out);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(res);
            });
        }
    });

    let results = results.into_inner().expect("workers joined");
    let mut report = String::new();
    let mut code = EXIT_OK;
    for (path, res) in configs.iter().zip(results) {
        let res = res.expect("every config was claimed by a worker");
        code = worse(code, res.code);
        let _ = writeln!(report, "== {} (exit {})", path.display(), res.code);
        let _ = writeln!(report, "{}\n", res.report.trim_end());
    }
    let summary = out.join("summary.txt");
    if let Err(e) = fs::write(&summary, &report) {
        return Outcome::new(EXIT_CONFIG, format!("{}: {e}", summary.display()));
    }
    Outcome::new(code, report)
}

/// Ordering used to merge exit codes: a config error stops a scenario before
/// it runs, an escape stops it before it can be verified.
pub fn severity(code: i32) -> u8 {
    match code {
        EXIT_OK => 0,
        EXIT_VERIFY => 1,
        EXIT_ESCAPE => 2,
        _ => 3,
    }
}

fn worse(a: i32, b: i32) -> i32 {
    if severity(b) > severity(a) {
        b
    } else {
        a
    }
}

fn sweep_one(path: &Path, out: &Path) -> Outcome {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(e) => return Outcome::new(EXIT_CONFIG, e),
    };
    let tel = match simulate(&cfg) {
        Ok(t) => t,
        Err(e) => return Outcome::new(EXIT_CONFIG, e),
    };
    let stem = path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    let csv = out.join(format!("{stem}.csv"));
    if let Err(e) = write_outputs(&tel, &csv, cfg.output.decimation.max(1), None) {
        return Outcome::new(EXIT_CONFIG, format!("{e:#}"));
    }
    let rep = verify(&tel, &cfg.verify);
    Outcome::new(verdict(&tel, rep.passed()), rep.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_code_follows_severity() {
        let merge = |codes: &[i32]| codes.iter().fold(EXIT_OK, |a, &b| worse(a, b));
        assert_eq!(merge(&[]), EXIT_OK);
        assert_eq!(merge(&[EXIT_OK, EXIT_VERIFY]), EXIT_VERIFY);
        assert_eq!(merge(&[EXIT_VERIFY, EXIT_ESCAPE, EXIT_OK]), EXIT_ESCAPE);
        assert_eq!(merge(&[EXIT_ESCAPE, EXIT_CONFIG, EXIT_VERIFY]), EXIT_CONFIG);
    }
}
