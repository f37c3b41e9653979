use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use korosmol::analysis::{hyperbolic_cross, worst_case_l2, WorstCaseOperator};
use korosmol::caps;
use korosmol::experiment::{fit_path, run_approx, run_sweep, to_csv, ExperimentConfig};
use korosmol::smolyak::build_grid;
use korosmol::Error;

#[derive(Parser)]
#[command(name = "korosmol", version, about = "Korobov-space approximation on Smolyak grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpKind {
    Qm,
    Pm,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the Smolyak grid G^d(m) as JSON.
    Grid {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate the configured test function at one level.
    Approx {
        #[arg(long)]
        config: PathBuf,
        /// Level; defaults to the last configured level.
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a convergence sweep over the configured levels.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Emit JSON records (with timings) instead of CSV.
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Enumerate the hyperbolic cross H(a).
    Cross {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the worst-case L2 error of Q_m or P_m on the unit ball.
    Worstcase {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: f64,
        #[arg(long, value_enum)]
        op: OpKind,
        #[arg(long)]
        m: u64,
        /// Radius of the coefficient box for g.
        #[arg(long = "box")]
        box_radius: u64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> korosmol::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> korosmol::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ExperimentConfig::from_json(&text)
        .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))?
        .with_seed(seed);
    cfg.validate()?;
    caps::set_override_mb(cfg.caps.as_ref().map(|c| c.dense_mb));
    Ok(cfg)
}

fn run(cli: Cli) -> korosmol::Result<()> {
    match cli.command {
        Command::Grid { d, m, out } => {
            let grid = build_grid(d, m)?;
            emit(out.as_deref(), &(serde_json::to_string(&grid)? + "\n"))
        }
        Command::Approx { config, m, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let m = m.unwrap_or(*cfg.levels.last().expect("validated"));
            let res = run_approx(&cfg, m)?;
            emit(out.as_deref(), &(serde_json::to_string_pretty(&res)? + "\n"))
        }
        Command::Sweep { config, out, seed, json, csv: _ } => {
            let cfg = load_config(&config, seed)?;
            let out = out.or_else(|| cfg.output_path.clone());
            let res = run_sweep(&cfg)?;
            let body = if json {
                serde_json::to_string_pretty(&res)? + "\n"
            } else {
                to_csv(&res.records)
            };
            emit(out.as_deref(), &body)?;
            if let (Some(path), Some(fit), false) = (out.as_deref(), &res.fit, json) {
                std::fs::write(fit_path(path), serde_json::to_string_pretty(fit)? + "\n")?;
            }
            let total: f64 = res.records.iter().map(|r| r.wall_time_ms).sum();
            eprintln!("{} levels, {:.1} ms total", res.records.len(), total);
            Ok(())
        }
        Command::Cross { d, a, out } => {
            let cross = hyperbolic_cross(d, a)?;
            eprintln!("count {}", cross.count);
            emit(out.as_deref(), &(serde_json::to_string(&cross)? + "\n"))
        }
        Command::Worstcase { d, r, op, m, box_radius, iters, seed, out } => {
            let operator = match op {
                OpKind::Qm => WorstCaseOperator::Qm(m),
                OpKind::Pm => WorstCaseOperator::Pm(
                    u32::try_from(m).map_err(|_| Error::Argument("level too large".into()))?,
                ),
            };
            let est = worst_case_l2(d, r, operator, box_radius, iters, seed)?;
            emit(out.as_deref(), &(serde_json::to_string_pretty(&est)? + "\n"))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Resource(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
