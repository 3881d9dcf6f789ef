//! Delayed-pull training with the GLU local rule, compared against the
//! synchronous baseline on the same seed.
//!
//! Gradients are still pushed every iteration, but the global weights are
//! pulled only once every k iterations. Between pulls each worker advances
//! its replica with GLU, which mixes the local gradient with a global
//! gradient inferred from the displacement between the last two pulled
//! snapshots.

use stepdelay::config::compatible_warmup;
use stepdelay::experiment::run_training;
use stepdelay::runtime::{LocalOptimizer, Strategy};
use stepdelay::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = 5;
    let mut base = ExperimentConfig {
        iterations: 2000,
        eval_interval: 200,
        ..ExperimentConfig::default()
    };
    base.hp.lr = 0.05;
    base.hp.loc_lr = 0.2; // four times the global rate
    base.hp.alpha = 2.0;
    base.hp.beta = 0.5;
    base.hp.workers = 4;
    base.hp.wp = compatible_warmup(99, k);

    let mut ssgd_cfg = base.clone();
    ssgd_cfg.strategy = Strategy::Ssgd;
    let ssgd = run_training(&ssgd_cfg)?;

    let mut ssd_cfg = base;
    ssd_cfg.strategy = Strategy::SsdSgd;
    ssd_cfg.local_optimizer = LocalOptimizer::Glu;
    ssd_cfg.hp.k = k;
    let ssd = run_training(&ssd_cfg)?;

    println!("iter   ssgd_loss   ssd_sgd_loss");
    for (a, b) in ssgd.records.iter().zip(ssd.records.iter()) {
        println!("{:<6} {:<11.6} {:<11.6}", a.iteration, a.train_loss, b.train_loss);
    }
    println!("ssgd:    {}", ssgd.summary_line());
    println!("ssd-sgd: {}", ssd.summary_line());
    let rel = (ssd.final_loss - ssgd.final_loss).abs() / ssgd.final_loss;
    println!("relative final-loss gap at k={k}: {:.3}%", 100.0 * rel);
    // per-worker communication: pushes every iteration, pulls once per k
    let last = ssd.records.last().unwrap();
    println!(
        "messages: {} push rounds, {} pull rounds across {} workers",
        last.pushes, last.pulls, ssd.config.hp.workers
    );
    Ok(())
}
