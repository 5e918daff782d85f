use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mrac_cli::commands::{cmd_run, cmd_sweep, cmd_verify, Outcome, RunArgs};

#[derive(Parser)]
#[command(name = "mrac", version, about = "Switched-plant MRAC simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario and write its telemetry as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV path; defaults to `[output] csv` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for SVG plots of |e_ref|, |theta_tilde| and Omega.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Keep every N-th row (reset rows are always kept).
        #[arg(long)]
        decimate: Option<usize>,
    },
    /// Simulate a scenario and check it against its verification thresholds.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run and verify every .toml config in a directory.
    Sweep {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Outcome { code, report } = match &cli.cmd {
        Cmd::Run {
            config,
            out,
            svg,
            decimate,
        } => cmd_run(RunArgs {
            config,
            out: out.as_deref(),
            svg: svg.as_deref(),
            decimate: *decimate,
        }),
        Cmd::Verify { config } => cmd_verify(config),
        Cmd::Sweep { dir, out, jobs } => cmd_sweep(dir, out, *jobs),
    };
    if code == 0 {
        println!("{report}");
    } else {
        eprintln!("{report}");
    }
    ExitCode::from(code as u8)
}
