//! Delayed-pull distributed SGD with staleness compensation.
//!
//! This crate implements a parameter-server training strategy that keeps
//! pushing gradients synchronously every iteration but pulls the global
//! weights only once every `k` iterations. Between pulls, workers keep
//! their replicas moving with a local optimizer; the GLU rule compensates
//! the delayed weights with a global gradient inferred from the
//! displacement between two pulled snapshots via the server's momentum
//! recurrence. Alongside the runtime, the crate ships the closed-form
//! iteration-time model of the compute/communicate pipeline and a
//! discrete-event simulator that validates it and quantifies speedup as a
//! function of the delay.
//!
//! # Layout
//!
//! - [`tensor`], [`model`], [`data`]: dense f64 kernels, three small
//!   differentiable models with verified gradients, synthetic datasets.
//! - [`optim`]: server-side momentum SGD and the worker-side local rules
//!   (plain SGD and GLU with k-step grad-sync compensation).
//! - [`runtime`]: key-sharded parameter servers, worker replicas, the
//!   push/pull protocol with its binary wire format, a deterministic
//!   engine, a threaded throughput mode, and a loopback socket transport.
//! - [`pipeline`]: the analytic iteration-time model and the discrete-event
//!   pipeline simulator.
//! - [`config`], [`metrics`], [`experiment`]: the experiment harness.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release -p stepdelay --example train_ssgd
//! cargo run --release -p stepdelay --example train_ssd_sgd
//! cargo run --release -p stepdelay --example train_asgd
//! cargo run --release -p stepdelay --example sweep_k
//! cargo run --release -p stepdelay --example warmup_sweep
//! cargo run --release -p stepdelay --example timing_study
//! cargo run --release -p stepdelay --example pipeline_trace
//! cargo run --release -p stepdelay --example grad_check
//! cargo run --release -p stepdelay --example socket_transport
//! cargo run --release -p stepdelay --example measure_profile
//! ```
//!
//! The `stepdelay` binary wraps the same drivers behind flags; see the
//! README for the full interface.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod runtime;
pub mod tensor;

pub use config::{compatible_warmup, load_config, ExperimentConfig};
pub use data::{make_synthetic, Dataset, DatasetKind};
pub use error::{ConfigError, Result, RuntimeError};
pub use experiment::{
    run_asgd, run_experiment, run_k_sweep, run_timing_study, run_training, RunOutput,
};
pub use metrics::MetricRecord;
pub use model::{Model, ModelKind};
pub use optim::{
    glu_grad_sync, glu_local_update, local_sgd_update, server_momentum_update, GluState,
    HyperParams, ServerOptState,
};
pub use pipeline::{
    delta_t_k, simulate_pipeline, ssd_avg_iter_time, ssgd_iter_time, PipelineCase, SimStrategy,
    TimingProfile,
};
pub use runtime::{Cluster, ClusterConfig, LocalOptimizer, Strategy};
pub use tensor::{DenseMat, DenseVec, Minibatch};
