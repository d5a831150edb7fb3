//! `ergo-rl` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime or property failure, 2 usage or config
//! error. Log verbosity comes from `ERGO_RL_LOG` (error, info, debug).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergo_rl::harness::runs::{write_eval_artifacts, write_eval_manifest, write_train_artifacts};
use ergo_rl::harness::verify::{run_and_record, VerifyOptions};
use ergo_rl::harness::{run_evaluation, run_sweep, run_training, ExperimentConfig};
use ergo_rl::mdp::QTable;
use ergo_rl::Error;

#[derive(Parser)]
#[command(name = "ergo-rl", version, about = "Growth-rate regularized multi-step Q-learning experiments")]
struct Cli {
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for training, sweeps and verification.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train per config; writes qtable.json, policy.csv, train_log.csv, manifest.json.
    Train { config: PathBuf },
    /// Evaluate the greedy policy of a saved Q-table (JSON or CSV).
    Eval { qtable: PathBuf, config: PathBuf },
    /// Train and evaluate every (lambda, seed) cell; writes sweep.csv.
    Sweep { config: PathBuf },
    /// Run a property suite (prop1, prop2).
    Verify { suite: String },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Usage(e.to_string()),
        other => Failure::from(other),
    })?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn load_qtable(path: &Path) -> Result<QTable, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|x| x == "csv") {
        QTable::from_csv(&text)
    } else {
        QTable::from_json(&text)
    };
    parsed.map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Train { config } => {
            let cfg = load_config(config, cli)?;
            let report = run_training(&cfg)?;
            write_train_artifacts(&cfg.out_dir, &cfg, &report)?;
            println!(
                "trained {} steps, {} window updates; greedy policy {:?}",
                cfg.learner.total_steps,
                report.per_window_log.len(),
                report.final_policy.actions()
            );
            println!("artifacts in {}", cfg.out_dir.display());
        }
        Command::Eval { qtable, config } => {
            let cfg = load_config(config, cli)?;
            let q = load_qtable(qtable)?;
            let summary = run_evaluation(&cfg, &q)?;
            write_eval_artifacts(&cfg.out_dir, &summary)?;
            write_eval_manifest(&cfg.out_dir, &cfg)?;
            println!(
                "median {} mean {} min {} max {}",
                summary.median, summary.mean, summary.min, summary.max
            );
            if let Some(w) = summary.median_terminal_wealth {
                println!("median terminal wealth {w}");
            }
        }
        Command::Sweep { config } => {
            let cfg = load_config(config, cli)?;
            let outcome = run_sweep(&cfg, cli.jobs, Some(&cfg.out_dir))?;
            print!("{}", outcome.to_csv());
            if !outcome.failures.is_empty() {
                for (lambda, seed, e) in &outcome.failures {
                    eprintln!("cell lambda={lambda} seed={seed} failed: {e}");
                }
                return Err(Failure::Runtime(format!("{} sweep cells failed", outcome.failures.len())));
            }
        }
        Command::Verify { suite } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("verify"));
            let opts = VerifyOptions {
                seed: cli.seed.unwrap_or(0),
                out_dir: Some(out.clone()),
                ..VerifyOptions::default()
            };
            let report = run_and_record(suite, &opts, &out)?;
            print!("{}", report.render());
            if !report.passed() {
                for f in &report.failure_files {
                    eprintln!("failing instance written to {}", f.display());
                }
                return Err(Failure::Runtime(format!("suite {suite} failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ERGO_RL_LOG", "error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
