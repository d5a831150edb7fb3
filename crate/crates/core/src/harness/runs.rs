//! Training, evaluation and sweep runs with their on-disk artifacts.
//!
//! Every artifact directory gets a `manifest.json` holding the full config
//! echo, its hash, the seed and the toolkit version, which is enough to
//! re-run the experiment. Nothing time-dependent is written, so reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::eval::{evaluate_policy, EvalSummary};
use crate::learner::{greedy_policy, train, TrainReport};
use crate::mdp::QTable;
use crate::{Error, Result, VERSION};

/// Mixed into the training seed so evaluation episodes use their own stream.
const EVAL_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn eval_seed(train_seed: u64) -> u64 {
    train_seed ^ EVAL_SEED_SALT
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_sha256: String,
    config: &'a ExperimentConfig,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let manifest = Manifest {
        command,
        version: VERSION,
        seed,
        config_sha256: cfg.sha256()?,
        config: cfg,
    };
    write_file(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)
}

/// Trains from a zero Q-table with the config's learner and seed.
pub fn run_training(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let mut env = cfg.env.build(cfg.learner.seed)?;
    let q0 = QTable::zeros(env.n_states(), env.n_actions());
    train(&mut env, &cfg.learner, q0)
}

/// Evaluates the greedy policy of `q` on a fresh environment.
pub fn run_evaluation(cfg: &ExperimentConfig, q: &QTable) -> Result<EvalSummary> {
    let mut env = cfg.env.build(eval_seed(cfg.learner.seed))?;
    if env.n_states() != q.n_states() || env.n_actions() != q.n_actions() {
        return Err(Error::dim(format!(
            "q-table is {}x{} but the {} environment is {}x{}",
            q.n_states(),
            q.n_actions(),
            cfg.env.kind(),
            env.n_states(),
            env.n_actions()
        )));
    }
    evaluate_policy(&mut env, &greedy_policy(q), cfg.eval.n_eval_episodes, cfg.eval.eval_horizon)
}

/// Writes `qtable.json`, `policy.csv`, `train_log.csv` and `manifest.json`.
pub fn write_train_artifacts(dir: &Path, cfg: &ExperimentConfig, report: &TrainReport) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("qtable.json"), &report.final_q.to_json()?)?;
    write_file(&dir.join("policy.csv"), &report.final_policy.to_csv())?;
    write_file(&dir.join("train_log.csv"), &report.log_csv())?;
    write_manifest(dir, "train", cfg, cfg.learner.seed)
}

/// Writes `eval.csv` and `eval_summary.json`.
pub fn write_eval_artifacts(dir: &Path, summary: &EvalSummary) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("eval.csv"), &summary.to_csv())?;
    write_file(&dir.join("eval_summary.json"), &serde_json::to_string_pretty(summary)?)
}

pub fn write_eval_manifest(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    write_manifest(dir, "eval", cfg, cfg.learner.seed)
}

/// One `(lambda, seed)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub summary: EvalSummary,
}

#[derive(Debug)]
pub struct SweepOutcome {
    /// Successful cells in sweep order (lambda-major).
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(f64, u64, Error)>,
}

impl SweepOutcome {
    /// CSV with header `lambda,seed,median,mean,min,max,growth_rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,seed,median,mean,min,max,growth_rate\n");
        for row in &self.rows {
            let s = &row.summary;
            let growth = s.growth_rate.map(|g| g.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{growth}",
                row.lambda, row.seed, s.median, s.mean, s.min, s.max
            );
        }
        out
    }
}

pub fn cell_dir(out: &Path, lambda: f64, seed: u64) -> PathBuf {
    out.join(format!("lambda_{lambda}_seed_{seed}"))
}

/// Config of one sweep cell: the sweep config with `lambda` and `seed` set.
pub fn cell_config(cfg: &ExperimentConfig, lambda: f64, seed: u64) -> ExperimentConfig {
    let mut cell = cfg.clone();
    cell.learner.lambda = lambda;
    cell.learner.seed = seed;
    cell.sweep.lambdas = vec![lambda];
    cell.sweep.seeds = vec![seed];
    cell
}

fn run_cell(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<EvalSummary> {
    let report = run_training(cfg)?;
    let summary = run_evaluation(cfg, &report.final_q)?;
    if let Some(out) = out {
        let dir = cell_dir(out, cfg.learner.lambda, cfg.learner.seed);
        write_train_artifacts(&dir, cfg, &report)?;
        write_eval_artifacts(&dir, &summary)?;
    }
    Ok(summary)
}

/// Trains and evaluates every `(lambda, seed)` cell on up to `jobs` threads.
///
/// With `out`, each cell writes its artifacts to its own directory and the
/// aggregate goes to `sweep.csv`. Failed cells are reported, not fatal.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize, out: Option<&Path>) -> Result<SweepOutcome> {
    let cells: Vec<(f64, u64)> = cfg
        .sweep
        .lambdas
        .iter()
        .flat_map(|&l| cfg.sweep.seeds.iter().map(move |&s| (l, s)))
        .collect();
    if let Some(out) = out {
        create_dir(out)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let results: Vec<(f64, u64, Result<EvalSummary>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(lambda, seed)| {
                log::info!("sweep cell lambda={lambda} seed={seed}");
                (lambda, seed, run_cell(&cell_config(cfg, lambda, seed), out))
            })
            .collect()
    });

    let mut outcome = SweepOutcome {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (lambda, seed, result) in results {
        match result {
            Ok(summary) => outcome.rows.push(SweepRow { lambda, seed, summary }),
            Err(e) => outcome.failures.push((lambda, seed, e)),
        }
    }
    if let Some(out) = out {
        write_file(&out.join("sweep.csv"), &outcome.to_csv())?;
        if !outcome.failures.is_empty() {
            let mut text = String::from("lambda,seed,error\n");
            for (l, s, e) in &outcome.failures {
                let _ = writeln!(text, "{l},{s},\"{}\"", e.to_string().replace('"', "'"));
            }
            write_file(&out.join("sweep_failures.csv"), &text)?;
        }
        write_manifest(out, "sweep", cfg, cfg.learner.seed)?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json_str(text).unwrap()
    }

    #[test]
    fn train_artifacts_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"{"env": {"type": "coin_toss"}, "learner": {"total_steps": 10, "n_steps": 3}}"#);
        let report = run_training(&c).unwrap();
        write_train_artifacts(dir.path(), &c, &report).unwrap();
        for name in ["qtable.json", "policy.csv", "train_log.csv", "manifest.json"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let log = std::fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
        assert_eq!(log.lines().count(), 1 + 8);
    }

    #[test]
    fn sweep_row_count_and_order_independence() {
        let c = cfg(
            r#"{"env": {"type": "coin_toss", "horizon": 20},
                "learner": {"total_steps": 300},
                "eval": {"n_eval_episodes": 5, "eval_horizon": 20},
                "sweep": {"lambdas": [0.0, 0.5], "seeds": [1, 2, 3]}}"#,
        );
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_sweep(&c, 2, Some(dir.path())).unwrap();
        assert_eq!(outcome.rows.len(), 6);
        assert!(outcome.failures.is_empty());

        let mut reversed = c.clone();
        reversed.sweep.lambdas.reverse();
        reversed.sweep.seeds.reverse();
        let dir2 = tempfile::tempdir().unwrap();
        run_sweep(&reversed, 1, Some(dir2.path())).unwrap();
        for (l, s) in [(0.0, 1), (0.5, 3)] {
            for name in ["qtable.json", "train_log.csv", "eval.csv", "manifest.json"] {
                let a = std::fs::read(cell_dir(dir.path(), l, s).join(name)).unwrap();
                let b = std::fs::read(cell_dir(dir2.path(), l, s).join(name)).unwrap();
                assert_eq!(a, b, "{name} differs for cell ({l}, {s})");
            }
        }
    }
}
