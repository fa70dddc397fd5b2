//! `barrier-qmc`: gap scans, scaling classification and annealing runs.
//!
//! Settings come from, in increasing priority: built-in defaults, the
//! `BARRIER_QMC_WORKERS` environment variable (worker count only), a
//! `--config` file of `key=value` lines, `--set key=value` pairs, and the
//! dedicated flags. Output goes to `--out` or stdout. On failure a single JSON
//! line `{"error": <kind>, "message": <text>}` is written to stderr and the
//! exit code is nonzero.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use barrier_qmc::experiment::{parse_config_text, run, ExperimentConfig, Mode};
use barrier_qmc::Error;
use clap::{Args, Parser, Subcommand};

const WORKERS_ENV: &str = "BARRIER_QMC_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "barrier-qmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum gap per valid n with a log-log fit, or g(s) for a single n.
    GapScan(Common),
    /// Residual-curvature classification for each alpha.
    GapScaling(Common),
    /// One annealing trace.
    QmcRun(Common),
    /// Per-s sweep counts averaged over replicas.
    SweepCurve(Common),
    /// Report-window sweeps against the inverse squared minimum gap.
    Correlate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Barrier exponent; comma-separated list where the mode allows it.
    #[arg(long)]
    alpha: Option<String>,
    /// Barrier width constant; comma-separated list for `correlate`.
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    n_min: Option<String>,
    #[arg(long)]
    n_max: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Trotter slices per bit (default 4, or 16 for alpha=0.5, c=2).
    #[arg(long)]
    trotter_mult: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    /// Master seed; replica seeds are derived from it.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides BARRIER_QMC_WORKERS).
    #[arg(long)]
    workers: Option<String>,
    /// Flat key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any other config key, e.g. `--set window=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl Common {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let out = self.out.as_ref().map(|p| p.display().to_string());
        [
            ("alpha", &self.alpha),
            ("c", &self.c),
            ("n", &self.n),
            ("n-min", &self.n_min),
            ("n-max", &self.n_max),
            ("beta", &self.beta),
            ("trotter-mult", &self.trotter_mult),
            ("replicas", &self.replicas),
            ("seed", &self.seed),
            ("out", &out),
            ("workers", &self.workers),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

fn build_config(mode: Mode, args: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::new(mode);
    // the environment only supplies a default; an explicit flag skips it
    if let (None, Ok(w)) = (&args.workers, std::env::var(WORKERS_ENV)) {
        cfg.set("workers", &w)
            .map_err(|e| Error::Config(format!("{WORKERS_ENV}: {e}")))?;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        for (k, v) in parse_config_text(&text)? {
            if k == "mode" && v != mode.as_str() {
                return Err(Error::Config(format!(
                    "config file is for mode `{v}`, not `{}`",
                    mode.as_str()
                )));
            }
            cfg.set(&k, &v)?;
        }
    }
    for kv in &args.extra {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    for (k, v) in args.flag_pairs() {
        cfg.set(k, &v)?;
    }
    // a stray `mode` key must not switch the subcommand
    cfg.mode = mode;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (mode, args) = match &cli.command {
        Command::GapScan(a) => (Mode::GapScan, a),
        Command::GapScaling(a) => (Mode::GapScaling, a),
        Command::QmcRun(a) => (Mode::QmcRun, a),
        Command::SweepCurve(a) => (Mode::SweepCurve, a),
        Command::Correlate(a) => (Mode::Correlate, a),
    };
    let cfg = build_config(mode, args)?;
    let output = run(&cfg)?;
    match &cfg.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            output.write_csv(&mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            output.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn report(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.to_string().lines().next().unwrap_or("bad arguments"));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidInstance { .. } => 2,
                _ => 1,
            })
        }
    }
}
