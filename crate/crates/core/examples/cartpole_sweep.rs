//! Cart-Pole lambda sweep over several training budgets, printed as a
//! markdown table. Uses `configs/cartpole_sweep.json` and replaces only
//! `total_steps` and `epsilon_decay_steps` (three quarters of the budget).
//!
//! ```text
//! cargo run --release --example cartpole_sweep > docs/cartpole_sweep.md
//! ```

use ergo_rl::harness::median;
use ergo_rl::harness::runs::{cell_config, run_evaluation, run_training};
use ergo_rl::harness::ExperimentConfig;

const BUDGETS: [usize; 6] = [30_000, 50_000, 100_000, 200_000, 500_000, 1_000_000];

fn main() {
    let base = ExperimentConfig::from_json_str(include_str!("../../../configs/cartpole_sweep.json"))
        .expect("bundled config parses");
    println!("# Cart-Pole lambda sweep\n");
    println!(
        "N = {}, e = 0, gamma = {}, alpha = {}, seeds {:?}, {} greedy evaluation episodes capped at {} steps.",
        base.learner.n_steps,
        base.learner.gamma,
        base.learner.alpha,
        base.sweep.seeds,
        base.eval.n_eval_episodes,
        base.eval.eval_horizon
    );
    println!("Each cell is the median cumulative reward over all pooled evaluation episodes of the three seeds;");
    println!("per-seed medians follow in brackets.\n");
    let header: Vec<String> = base.sweep.lambdas.iter().map(|l| format!("lambda = {l}")).collect();
    println!("| training steps | {} |", header.join(" | "));
    println!("|---|{}", "---|".repeat(header.len()));
    for budget in BUDGETS {
        let mut cfg = base.clone();
        cfg.learner.total_steps = budget;
        cfg.learner.epsilon_decay_steps = budget * 3 / 4;
        let cells: Vec<String> = cfg
            .sweep
            .lambdas
            .iter()
            .map(|&lambda| {
                let mut pooled = Vec::new();
                let mut per_seed = Vec::new();
                for &seed in &cfg.sweep.seeds {
                    let c = cell_config(&cfg, lambda, seed);
                    let report = run_training(&c).expect("training runs");
                    let rewards = run_evaluation(&c, &report.final_q).expect("evaluation runs").cumulative_rewards;
                    per_seed.push(median(&rewards));
                    pooled.extend(rewards);
                }
                let seeds: Vec<String> = per_seed.iter().map(|m| m.to_string()).collect();
                format!("{} [{}]", median(&pooled), seeds.join(", "))
            })
            .collect();
        println!("| {budget} | {} |", cells.join(" | "));
    }
}
