use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use erm_core::exec::Execution;
use erm_spectra::{run, Command, ExperimentConfig, RunError, RunOptions};

/// Euclidean random matrix experiments.
#[derive(Parser, Debug)]
#[command(name = "erm-spectra", version)]
struct Cli {
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; falls back to $ERM_SPECTRA_OUT, then `output_dir`, then `erm-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the first realization's points to points.csv.
    #[arg(long)]
    save_points: bool,
    /// Use the points in this CSV instead of sampling (one realization).
    #[arg(long)]
    load_points: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match ExperimentConfig::from_path(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("erm-spectra: {e}");
            return ExitCode::from(1);
        }
    };
    config.command = Some(cli.command);
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    config.save_points |= cli.save_points;
    let out_root = cli
        .out
        .or_else(|| std::env::var_os("ERM_SPECTRA_OUT").map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("erm-out"));
    let threads = cli.threads.unwrap_or(0);
    let exec = if threads == 1 { Execution::Serial } else { Execution::Parallel };
    #[cfg(feature = "parallel")]
    if threads > 1 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("erm-spectra: thread pool: {e}");
        }
    }
    let opts = RunOptions {
        out_root,
        exec,
        load_points: cli.load_points,
    };
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let manifest = match run(&config, &opts) {
        Ok(m) => m,
        Err(e @ RunError::Config(_)) => {
            eprintln!("erm-spectra: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("erm-spectra: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = opts.out_root.join(cli.command.name());
    let metadata = serde_json::json!({
        "started_unix": started,
        "wall_clock_seconds": clock.elapsed().as_secs_f64(),
        "threads": threads,
        "execution": if exec.is_parallel() { "parallel" } else { "serial" },
    });
    if let Err(e) = std::fs::write(dir.join("metadata.json"), format!("{metadata:#}\n")) {
        eprintln!("erm-spectra: {e}");
    }
    for r in &manifest.records {
        let verdict = match r.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        println!(
            "{:<28} m={:<4} n={:<6} theory={:<14} empirical={:<14} se={:<12} {verdict}",
            r.quantity,
            r.m.map(|m| m.to_string()).unwrap_or_default(),
            r.n.map(|m| m.to_string()).unwrap_or_default(),
            r.theory.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.empirical_mean.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.empirical_se.map(|v| format!("{v:.2e}")).unwrap_or_default(),
        );
    }
    println!("wrote {}", dir.display());
    if manifest.solver.failures > 0 {
        eprintln!("erm-spectra: {} solver failures", manifest.solver.failures);
        for m in &manifest.solver.failure_messages {
            eprintln!("  {m}");
        }
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
