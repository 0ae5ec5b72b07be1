use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgl_core::experiments::{
    run_attractor, run_bounds, run_simulate, run_sweep, run_truncation, RunConfig,
};
use dgl_core::Error;

#[derive(Parser)]
#[command(name = "dgl", version, about = "Lattice Ginzburg-Landau experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration; writes trajectory.csv and report.json.
    Simulate { config: PathBuf },
    /// Run the [sweep] section; writes sweep.csv.
    Sweep { config: PathBuf },
    /// Absorbing-ball experiment; writes attractor.json and decay.csv.
    Attractor { config: PathBuf },
    /// Truncation ladder; writes truncation.csv.
    Truncate { config: PathBuf },
    /// Closed-form diagnostics only; writes bounds.json.
    Bounds { config: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::config(0, format!("cannot read {}: {io}", path.display())),
        other => other,
    })?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Simulate { config } => {
            let s = run_simulate(&load(config, cli.seed)?, out)?;
            println!(
                "blew_up={} t_sim={:?} t_star={:?} valid={} t_end={}",
                s.report.blew_up, s.report.t_sim, s.bound.t_star, s.bound.valid, s.report.t_end
            );
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Sweep { config } => {
            let rows = run_sweep(&load(config, cli.seed)?, out)?;
            println!(
                "{} rows written to {}",
                rows.len(),
                out.join("sweep.csv").display()
            );
        }
        Command::Attractor { config } => {
            let report = run_attractor(&load(config, cli.seed)?, out)?;
            if let Some(f) = &report.finite {
                println!("t0={} all_within_t0={}", f.ball.t0, f.all_within_t0);
            }
            if let Some(w) = &report.weighted {
                println!(
                    "sigma0={} slope={} decay_ok={} limsup_ok={:?} tail_m={:?}",
                    w.sigma0.value, w.measured_slope, w.decay_ok, w.limsup_ok, w.tail_m
                );
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Truncate { config } => {
            let report = run_truncation(&load(config, cli.seed)?, out)?;
            for r in &report.rows {
                println!(
                    "N={} 2N={} sup_difference={:e}",
                    r.half_width, r.doubled, r.sup_difference
                );
            }
        }
        Command::Bounds { config } => {
            let report = run_bounds(&load(config, cli.seed)?, out)?;
            println!(
                "t_star={:?} valid={}",
                report.blowup.t_star, report.blowup.valid
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else if e.is_hypothesis() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
