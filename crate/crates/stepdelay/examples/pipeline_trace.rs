//! Emits the discrete-event trace of a short delayed-pull pipeline run as
//! CSV (time, resource, event, layer, iteration).
//!
//! Reading the channel rows shows the cadence: push-only iterations occupy
//! the channel briefly, the k-th iteration pays the full per-layer round
//! trip, and the following iteration's local updates wait for the
//! retrieved weights.

use stepdelay::pipeline::{demo_profile, simulate_pipeline, SimStrategy};

fn main() {
    let profile = demo_profile();
    let k = 3;
    let sim = simulate_pipeline(&profile, SimStrategy::SsdSgd, k, 7);
    print!("{}", sim.trace_csv());
    eprintln!(
        "steady-state average iteration time: {:.4} (k = {k})",
        sim.avg_iter_time
    );
}
