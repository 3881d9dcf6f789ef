//! Asynchronous baseline: every push applies immediately, pulls return the
//! latest weight with no barrier. The deterministic scheduler interleaves
//! worker compute and push phases in a seeded random order, so gradients
//! age by however many foreign pushes land in between.

use stepdelay::experiment::{run_asgd, run_training};
use stepdelay::runtime::Strategy;
use stepdelay::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig {
        iterations: 1500,
        eval_interval: 250,
        ..ExperimentConfig::default()
    };
    cfg.hp.lr = 0.05;
    cfg.hp.workers = 4;

    let asgd = run_asgd(&cfg)?;
    let mut ssgd_cfg = cfg;
    ssgd_cfg.strategy = Strategy::Ssgd;
    let ssgd = run_training(&ssgd_cfg)?;

    println!("iter   asgd_loss   ssgd_loss");
    for (a, s) in asgd.records.iter().zip(ssgd.records.iter()) {
        println!("{:<6} {:<11.6} {:<11.6}", a.iteration, a.train_loss, s.train_loss);
    }
    println!("asgd: {}", asgd.summary_line());
    println!("ssgd: {}", ssgd.summary_line());
    println!(
        "staleness cost in final loss: {:+.3}%",
        100.0 * (asgd.final_loss - ssgd.final_loss) / ssgd.final_loss
    );
    Ok(())
}
