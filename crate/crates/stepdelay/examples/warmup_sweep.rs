//! Warm-up sensitivity: accuracy as a function of the warm-up length.
//!
//! The delay mechanism relies on weights being past the fast-moving early
//! phase before pulls get sparse; too little warm-up hurts the final
//! accuracy. Lengths are chosen cadence-compatible with k = 5.

use stepdelay::experiment::run_training;
use stepdelay::runtime::{LocalOptimizer, Strategy};
use stepdelay::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut base = ExperimentConfig {
        strategy: Strategy::SsdSgd,
        local_optimizer: LocalOptimizer::Glu,
        iterations: 2000,
        eval_interval: 2000,
        ..ExperimentConfig::default()
    };
    base.hp.lr = 0.05;
    base.hp.loc_lr = 0.2;
    base.hp.workers = 4;
    base.hp.k = 5;

    println!("warmup  final_loss   final_accuracy");
    for wp in [99u64, 199, 299, 499] {
        let mut cfg = base.clone();
        cfg.hp.wp = wp;
        let out = run_training(&cfg)?;
        println!(
            "{:<7} {:<12.6} {:.4}",
            wp,
            out.final_loss,
            out.final_accuracy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
