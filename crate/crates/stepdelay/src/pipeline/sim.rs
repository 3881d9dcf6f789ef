//! Discrete-event simulation of the layered compute/communicate pipeline.
//!
//! One representative worker is simulated against four resources: a serial
//! compute engine (forward, then backward per layer in reverse), a serial
//! communication channel (per-layer blocks, bubbles charged to the preceding
//! layer), a serial local-update lane that overlaps with sends, and the
//! server, whose per-layer cost rides inside the communication block.
//!
//! Scheduling rules for the delayed strategy:
//! - gradients become sendable in backward order (last layer first);
//! - push-only iterations put only the send cost on the channel; the
//!   iteration that pulls pays the full per-layer round trip
//!   (send + sync wait + server update + retrieve) as one serialized block;
//! - the local update runs as soon as its gradient is ready, except in the
//!   iteration right after a pull, where layer j's local update also waits
//!   for layer j's retrieved weight (the update rebases on the pulled
//!   global weight);
//! - the next iteration's forward starts when the previous iteration's
//!   local updates finish (the updated weights are what it computes on);
//! - per-layer gradient buffers are double-buffered: backward for layer j
//!   may not start before the send of layer j two iterations earlier has
//!   left the buffer.

use super::profile::TimingProfile;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStrategy {
    Ssgd,
    SsdSgd,
}

#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub time: f64,
    pub resource: &'static str,
    pub event: &'static str,
    pub layer: usize,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    /// Steady-state average iteration time, measured between whole-cycle
    /// anchors with the first two cycles excluded.
    pub avg_iter_time: f64,
    /// Completion time of the last simulated iteration's pipeline work.
    pub makespan: f64,
    pub trace: Vec<TraceEvent>,
}

impl SimResult {
    /// Event trace as CSV (time, resource, event, layer, iteration).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("time,resource,event,layer,iteration\n");
        for e in &self.trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.time, e.resource, e.event, e.layer, e.iteration
            );
        }
        out
    }
}

/// Runs the pipeline for `n_iters` iterations and reports the steady-state
/// average iteration time. For the delayed strategy, `k` is the pull period;
/// it is ignored for the synchronous strategy. `n_iters` should cover at
/// least three pull cycles for the average to be meaningful.
pub fn simulate_pipeline(
    profile: &TimingProfile,
    strategy: SimStrategy,
    k: u64,
    n_iters: usize,
) -> SimResult {
    assert!(k >= 1, "delay steps must be >= 1");
    assert!(n_iters >= 1);
    let l = profile.layers();
    let k = k as usize;

    let mut trace = Vec::new();
    let mut fw_start = vec![0.0f64; n_iters];
    // send_complete[i][j]: when layer j's gradient of iteration i left its buffer
    let mut send_complete = vec![vec![0.0f64; l]; n_iters];
    // pulled_at[i][j]: when layer j's retrieved weight landed (pull iterations)
    let mut pulled_at = vec![vec![f64::NEG_INFINITY; l]; n_iters];
    let mut loc_end = vec![vec![0.0f64; l]; n_iters];
    let mut chain_end = vec![0.0f64; n_iters];

    let mut channel_free = 0.0f64;
    let mut makespan = 0.0f64;

    for i in 0..n_iters {
        // forward gate: synchronous waits for all weights to return;
        // delayed computes on the locally updated weights
        let start = if i == 0 {
            0.0
        } else {
            match strategy {
                SimStrategy::Ssgd => chain_end[i - 1],
                SimStrategy::SsdSgd => loc_end[i - 1][0],
            }
        };
        fw_start[i] = start;
        trace.push(TraceEvent {
            time: start,
            resource: "compute",
            event: "forward_start",
            layer: 0,
            iteration: i,
        });

        // backward, last layer first
        let mut t = start + profile.forward;
        let mut bw_end = vec![0.0f64; l];
        for j in (0..l).rev() {
            if strategy == SimStrategy::SsdSgd && i >= 2 {
                // double-buffered gradient slots
                t = t.max(send_complete[i - 2][j]);
            }
            t += profile.backward[j];
            bw_end[j] = t;
            trace.push(TraceEvent {
                time: t,
                resource: "compute",
                event: "backward_done",
                layer: j,
                iteration: i,
            });
        }

        let pulls_this_iter = match strategy {
            SimStrategy::Ssgd => true,
            SimStrategy::SsdSgd => (i + 1) % k == 0,
        };

        // channel blocks, backward order
        for j in (0..l).rev() {
            let block_start = bw_end[j].max(channel_free);
            let block_len = if pulls_this_iter {
                profile.comm(j)
            } else {
                profile.send[j]
            };
            send_complete[i][j] = block_start + profile.send[j];
            channel_free = block_start + block_len;
            if pulls_this_iter {
                pulled_at[i][j] = channel_free;
                trace.push(TraceEvent {
                    time: channel_free,
                    resource: "channel",
                    event: "pull_done",
                    layer: j,
                    iteration: i,
                });
            } else {
                trace.push(TraceEvent {
                    time: channel_free,
                    resource: "channel",
                    event: "push_done",
                    layer: j,
                    iteration: i,
                });
            }
        }
        chain_end[i] = channel_free;
        makespan = makespan.max(channel_free);

        // local updates (delayed strategy only), overlapping with sends
        if strategy == SimStrategy::SsdSgd {
            // the iteration right after a pull rebases on the pulled weights
            let rebase = i >= 1 && i % k == 0;
            let mut lane = 0.0f64;
            for j in (0..l).rev() {
                let mut s = bw_end[j].max(lane);
                if rebase {
                    s = s.max(pulled_at[i - 1][j]);
                }
                lane = s + profile.local_update[j];
                loc_end[i][j] = lane;
                trace.push(TraceEvent {
                    time: lane,
                    resource: "local",
                    event: "local_update_done",
                    layer: j,
                    iteration: i,
                });
            }
            makespan = makespan.max(loc_end[i][0]);
        }
    }

    // steady-state average between whole-cycle anchors, skipping the first
    // two cycles
    let cycle = match strategy {
        SimStrategy::Ssgd => 1,
        SimStrategy::SsdSgd => k,
    };
    let j0 = 2 * cycle;
    let j1 = ((n_iters - 1) / cycle) * cycle;
    let avg_iter_time = if j1 > j0 {
        (fw_start[j1] - fw_start[j0]) / (j1 - j0) as f64
    } else {
        makespan / n_iters as f64
    };

    SimResult {
        avg_iter_time,
        makespan,
        trace,
    }
}
