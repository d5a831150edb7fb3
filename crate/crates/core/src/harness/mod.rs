//! Experiment driver: configs, seeded train/eval/sweep runs with artifacts,
//! and the randomized verification suites.

pub mod config;
pub mod eval;
pub mod runs;
pub mod verify;

pub use config::{EvalConfig, ExperimentConfig, SweepConfig};
pub use eval::{evaluate_policy, median, EvalSummary};
pub use runs::{run_evaluation, run_sweep, run_training, SweepOutcome, SweepRow};
pub use verify::{run_suite, SuiteReport, VerifyOptions, SUITES};
