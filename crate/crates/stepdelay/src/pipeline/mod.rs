//! Iteration-time modeling: closed-form formulas and a discrete-event
//! pipeline simulator that cross-validates them.

pub mod analytic;
pub mod profile;
pub mod sim;

pub use analytic::{classify, delta_t_k, ssd_avg_iter_time, ssgd_iter_time, PipelineCase};
pub use profile::{demo_profile, TimingProfile};
pub use sim::{simulate_pipeline, SimResult, SimStrategy, TraceEvent};
