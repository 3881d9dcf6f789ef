//! Parameter-server training runtime: protocol, shards, workers, the
//! deterministic engine, threads, and the socket transport.

pub mod cluster;
pub mod message;
pub mod net;
pub mod shard;
pub mod threaded;
pub mod wire;
pub mod worker;

pub use cluster::{Cluster, ClusterConfig};
pub use message::{Message, MessageKind, MessageLog, MONITOR_ID};
pub use shard::{ParamShard, ServerMode};
pub use threaded::{run_threaded, run_worker_loop, PsClient, ServerHub, ThroughputReport};
pub use worker::{LocalOptimizer, Strategy, WorkerReplica};
