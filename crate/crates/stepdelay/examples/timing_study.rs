//! Iteration-time model vs discrete-event simulation.
//!
//! For a hand-authored communication-heavy profile and one sampled profile
//! per regime, prints the closed-form average iteration time against the
//! simulated one for k = 1..5, with speedups over the synchronous baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stepdelay::experiment::{run_timing_study, timing_table};
use stepdelay::pipeline::profile::sample;
use stepdelay::pipeline::{classify, demo_profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let profiles = [
        ("hand-authored demo".to_string(), demo_profile()),
        ("sampled compute-overlapped".to_string(), sample::case1(&mut rng)),
        ("sampled send-bound".to_string(), sample::case2(&mut rng)),
    ];
    for (name, profile) in profiles {
        let decision = classify(&profile);
        println!(
            "== {name} ({} layers, {}; send {:.3} vs compute window {:.3})",
            profile.layers(),
            decision.case,
            decision.send_total,
            decision.compute_window
        );
        let rows = run_timing_study(&profile, 1..=5)?;
        print!("{}", timing_table(&rows));
        println!();
    }
    Ok(())
}
