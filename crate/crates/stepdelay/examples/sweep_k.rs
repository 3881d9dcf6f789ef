//! Delay-step sweep: convergence across k = 1..5 with CSVs per run.
//!
//! The warm-up length is adjusted down to the nearest value that keeps
//! (1 + warmup) divisible by k, which the pull cadence requires.

use stepdelay::experiment::{run_k_sweep, sweep_table};
use stepdelay::runtime::{LocalOptimizer, Strategy};
use stepdelay::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::temp_dir().join("stepdelay_sweep");
    let mut base = ExperimentConfig {
        strategy: Strategy::SsdSgd,
        local_optimizer: LocalOptimizer::Glu,
        iterations: 2000,
        eval_interval: 200,
        out_dir: Some(out_dir.clone()),
        ..ExperimentConfig::default()
    };
    base.hp.lr = 0.05;
    base.hp.loc_lr = 0.2;
    base.hp.workers = 4;
    base.hp.wp = 99;

    let rows = run_k_sweep(&base, 1..=5)?;
    print!("{}", sweep_table(&rows));
    println!("per-run CSVs in {}", out_dir.display());
    Ok(())
}
