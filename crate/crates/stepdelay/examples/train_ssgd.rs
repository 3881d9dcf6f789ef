//! Baseline: fully synchronous training on the synthetic logistic task.
//!
//! Every iteration each worker pushes its gradient and pulls the freshly
//! updated weights; the server updates once per iteration from the mean of
//! all workers' gradients.

use stepdelay::experiment::run_training;
use stepdelay::runtime::Strategy;
use stepdelay::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig {
        strategy: Strategy::Ssgd,
        iterations: 1000,
        eval_interval: 100,
        ..ExperimentConfig::default()
    };
    cfg.hp.lr = 0.05;
    cfg.hp.workers = 4;

    let out = run_training(&cfg)?;
    println!("iter   epoch  loss      accuracy  pushes  pulls");
    for r in &out.records {
        println!(
            "{:<6} {:<6} {:<9.5} {:<9.4} {:<7} {}",
            r.iteration,
            r.epoch,
            r.train_loss,
            r.eval_accuracy.unwrap_or(f64::NAN),
            r.pushes,
            r.pulls
        );
    }
    println!("{}", out.summary_line());
    Ok(())
}
