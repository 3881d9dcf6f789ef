//! Throughput mode: workers and servers as real threads exchanging the same
//! protocol messages over channels.
//!
//! Trajectories for the synchronous strategies are identical to the
//! deterministic engine because aggregation is order-normalized; only the
//! message log order differs. The asynchronous strategy is genuinely racy
//! here and reproducible only under the deterministic engine.

use super::message::{Message, MessageKind, MONITOR_ID};
use super::shard::ParamShard;
use super::worker::{Strategy, WorkerReplica};
use crate::data::Dataset;
use crate::error::{Result, RuntimeError};
use crate::optim::HyperParams;
use crate::tensor::DenseVec;
use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;

/// Client view of the parameter servers: blocking push (acknowledged) and
/// blocking pull.
pub trait PsClient {
    fn push(&mut self, key: u32, worker_id: u16, iteration: u64, payload: Vec<f64>) -> Result<()>;
    fn pull(&mut self, key: u32, worker_id: u16, iteration: u64) -> Result<Vec<f64>>;
}

/// Messages routed through the in-process hub.
struct Routed {
    msg: Message,
}

/// One server thread owning a subset of shards; replies are routed to
/// per-worker channels by worker id.
pub struct ServerHub {
    ingress: Vec<Sender<Routed>>,
    /// key -> server index
    key_server: Arc<HashMap<u32, usize>>,
    handles: Vec<JoinHandle<Result<Vec<ParamShard>>>>,
}

impl ServerHub {
    /// Partitions `shards` round-robin over `servers` threads. `reply_txs`
    /// maps every possible worker id (and the monitor) to its reply channel.
    pub fn spawn(
        shards: Vec<ParamShard>,
        hp: HyperParams,
        servers: u16,
        reply_txs: HashMap<u16, Sender<Message>>,
    ) -> ServerHub {
        let servers = servers.max(1) as usize;
        let mut key_server = HashMap::new();
        let mut per_server: Vec<Vec<ParamShard>> = (0..servers).map(|_| Vec::new()).collect();
        for (i, shard) in shards.into_iter().enumerate() {
            key_server.insert(shard.key, i % servers);
            per_server[i % servers].push(shard);
        }
        let key_server = Arc::new(key_server);
        let mut ingress = Vec::new();
        let mut handles = Vec::new();
        for own in per_server {
            let (tx, rx): (Sender<Routed>, Receiver<Routed>) = channel();
            ingress.push(tx);
            let reply_txs = reply_txs.clone();
            let hp = hp.clone();
            handles.push(std::thread::spawn(move || -> Result<Vec<ParamShard>> {
                let mut own = own;
                while let Ok(routed) = rx.recv() {
                    let key = routed.msg.key;
                    let shard = own
                        .iter_mut()
                        .find(|s| s.key == key)
                        .ok_or_else(|| RuntimeError::Protocol(format!("no shard for key {key}")))?;
                    let replies = shard.handle(&routed.msg, &hp)?;
                    for reply in replies {
                        if let Some(tx) = reply_txs.get(&reply.worker_id) {
                            // a vanished worker is a shutdown, not an error
                            let _ = tx.send(reply);
                        }
                    }
                }
                Ok(own)
            }));
        }
        ServerHub {
            ingress,
            key_server,
            handles,
        }
    }

    pub fn client(&self, reply_rx: Receiver<Message>) -> HubClient {
        HubClient {
            ingress: self.ingress.clone(),
            key_server: Arc::clone(&self.key_server),
            reply_rx,
        }
    }

    /// Drops ingress and joins the servers, returning their shards.
    pub fn shutdown(self) -> Result<Vec<ParamShard>> {
        drop(self.ingress);
        let mut shards = Vec::new();
        for h in self.handles {
            let own = h
                .join()
                .map_err(|_| RuntimeError::Protocol("server thread panicked".into()))??;
            shards.extend(own);
        }
        shards.sort_by_key(|s| s.key);
        Ok(shards)
    }
}

/// In-process channel client.
pub struct HubClient {
    ingress: Vec<Sender<Routed>>,
    key_server: Arc<HashMap<u32, usize>>,
    reply_rx: Receiver<Message>,
}

impl HubClient {
    fn send(&self, msg: Message) -> Result<()> {
        let server = *self
            .key_server
            .get(&msg.key)
            .ok_or_else(|| RuntimeError::Protocol(format!("unknown key {}", msg.key)))?;
        self.ingress[server]
            .send(Routed { msg })
            .map_err(|_| RuntimeError::Transport("server hub is down".into()))
    }

    fn recv_kind(&self, kind: MessageKind) -> Result<Message> {
        let msg = self
            .reply_rx
            .recv()
            .map_err(|_| RuntimeError::Transport("reply channel closed".into()))?;
        if msg.kind != kind {
            return Err(RuntimeError::Protocol(format!(
                "expected {kind:?}, got {:?}",
                msg.kind
            )));
        }
        Ok(msg)
    }
}

impl PsClient for HubClient {
    fn push(&mut self, key: u32, worker_id: u16, iteration: u64, payload: Vec<f64>) -> Result<()> {
        self.send(Message::push(key, worker_id, iteration, payload))?;
        self.recv_kind(MessageKind::PushAck)?;
        Ok(())
    }

    fn pull(&mut self, key: u32, worker_id: u16, iteration: u64) -> Result<Vec<f64>> {
        self.send(Message::pull_req(key, worker_id, iteration))?;
        let resp = self.recv_kind(MessageKind::PullResp)?;
        Ok(resp.payload)
    }
}

/// Runs one worker for `total_iters` iterations against any transport.
/// The math matches the deterministic engine step for step.
pub fn run_worker_loop<C: PsClient>(
    client: &mut C,
    replica: &mut WorkerReplica,
    dataset: &Dataset,
    hp: &HyperParams,
    batch_seed: u64,
    slices: &[(usize, usize)],
    total_iters: u64,
) -> Result<()> {
    let pull_all = |client: &mut C, replica: &WorkerReplica| -> Result<DenseVec> {
        let total: usize = slices.iter().map(|(_, l)| l).sum();
        let mut out = DenseVec::zeros(total);
        for (key, (offset, len)) in slices.iter().enumerate() {
            let payload = client.pull(key as u32, replica.worker_id, replica.num)?;
            if payload.len() != *len {
                return Err(RuntimeError::DimensionMismatch(format!(
                    "pull payload {} != slice {len}",
                    payload.len()
                )));
            }
            out.as_mut_slice()[*offset..offset + len].copy_from_slice(&payload);
        }
        Ok(out)
    };

    while replica.num < total_iters {
        let warmup_style = match replica.strategy {
            Strategy::Ssgd => true,
            Strategy::Asgd => false,
            Strategy::SsdSgd => replica.num < hp.wp,
        };
        if replica.strategy == Strategy::Asgd {
            // async: refresh, compute, push; no barrier anywhere
            let global = pull_all(client, replica)?;
            replica.model.set_params(global.clone())?;
            replica.local_weight = global;
            let grad = replica.compute_grad(dataset, hp, batch_seed)?;
            for (key, (offset, len)) in slices.iter().enumerate() {
                let payload = grad.as_slice()[*offset..offset + len].to_vec();
                client.push(key as u32, replica.worker_id, replica.num, payload)?;
            }
            replica.advance();
            continue;
        }

        let grad = replica.compute_grad(dataset, hp, batch_seed)?;
        for (key, (offset, len)) in slices.iter().enumerate() {
            let payload = grad.as_slice()[*offset..offset + len].to_vec();
            client.push(key as u32, replica.worker_id, replica.num, payload)?;
        }
        if warmup_style {
            let global = pull_all(client, replica)?;
            replica.apply_warmup_pull(global)?;
        } else {
            if replica.num == hp.wp {
                replica.begin_delay_stage();
            }
            replica.apply_local_update(&grad, hp)?;
            if replica.wants_pull(hp) {
                let global = pull_all(client, replica)?;
                replica.apply_delay_pull(global);
            }
            replica.advance();
        }
    }
    Ok(())
}

/// Outcome of a threaded run.
pub struct ThroughputReport {
    pub final_weight: DenseVec,
    pub elapsed: std::time::Duration,
    pub iterations: u64,
}

/// Spawns servers and workers as threads and runs `total_iters` iterations.
pub fn run_threaded(
    model: crate::model::Model,
    dataset: Dataset,
    hp: HyperParams,
    strategy: Strategy,
    local_optimizer: super::worker::LocalOptimizer,
    servers: u16,
    devices_per_worker: usize,
    asgd_momentum: bool,
    batch_seed: u64,
    total_iters: u64,
) -> Result<ThroughputReport> {
    use super::shard::ServerMode;
    let mode = match strategy {
        Strategy::Asgd => ServerMode::Asynchronous {
            momentum: asgd_momentum,
        },
        _ => ServerMode::Synchronous,
    };
    let mut shards = Vec::new();
    let mut slices = Vec::new();
    for (i, layer) in model.layer_spec().iter().enumerate() {
        let slice = model.params.as_slice()[layer.offset..layer.offset + layer.len].to_vec();
        shards.push(ParamShard::new(i as u32, DenseVec::from_vec(slice)?, hp.workers, mode));
        slices.push((layer.offset, layer.len));
    }

    let mut reply_txs = HashMap::new();
    let mut reply_rxs = Vec::new();
    for w in 0..hp.workers {
        let (tx, rx) = channel();
        reply_txs.insert(w, tx);
        reply_rxs.push(rx);
    }
    let (mon_tx, _mon_rx) = channel();
    reply_txs.insert(MONITOR_ID, mon_tx);

    let hub = ServerHub::spawn(shards, hp.clone(), servers, reply_txs);
    let dataset = Arc::new(dataset);
    let slices_arc = Arc::new(slices);

    let start = std::time::Instant::now();
    let mut worker_handles = Vec::new();
    for (w, reply_rx) in reply_rxs.into_iter().enumerate() {
        let mut client = hub.client(reply_rx);
        let mut replica = WorkerReplica::new(
            w as u16,
            model.clone(),
            strategy,
            local_optimizer,
            devices_per_worker,
        );
        let dataset = Arc::clone(&dataset);
        let slices = Arc::clone(&slices_arc);
        let hp = hp.clone();
        worker_handles.push(std::thread::spawn(move || -> Result<()> {
            run_worker_loop(
                &mut client,
                &mut replica,
                &dataset,
                &hp,
                batch_seed,
                &slices,
                total_iters,
            )
        }));
    }
    for h in worker_handles {
        h.join()
            .map_err(|_| RuntimeError::Protocol("worker thread panicked".into()))??;
    }
    let elapsed = start.elapsed();

    let shards = hub.shutdown()?;
    let total: usize = slices_arc.iter().map(|(_, l)| l).sum();
    let mut final_weight = DenseVec::zeros(total);
    for (shard, (offset, len)) in shards.iter().zip(slices_arc.iter()) {
        final_weight.as_mut_slice()[*offset..offset + len].copy_from_slice(shard.weight.as_slice());
    }
    Ok(ThroughputReport {
        final_weight,
        elapsed,
        iterations: total_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, DatasetKind};
    use crate::model::{Model, ModelKind};
    use crate::runtime::cluster::{Cluster, ClusterConfig};
    use crate::runtime::worker::LocalOptimizer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threaded_ssd_sgd_matches_deterministic_engine_bitwise() {
        let seed = 77u64;
        let hp = HyperParams {
            lr: 0.2,
            loc_lr: 0.8,
            alpha: 2.0,
            beta: 0.5,
            wd: 0.0,
            momentum: 0.9,
            k: 3,
            wp: 5,
            batch_size: 8,
            workers: 3,
        };
        let dataset = make_synthetic(DatasetKind::TwoClass, 128, 6, 0.05, seed).unwrap();
        let mut model = Model::new(ModelKind::LogisticRegression, 6, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.init_params(&mut rng);

        let mut det = Cluster::new(
            model.clone(),
            dataset.clone(),
            hp.clone(),
            ClusterConfig {
                strategy: Strategy::SsdSgd,
                local_optimizer: LocalOptimizer::Glu,
                scheduler_seed: 1,
                batch_seed: seed,
                ..ClusterConfig::default()
            },
        );
        let total = 23u64;
        for _ in 0..total {
            det.step().unwrap();
        }

        let report = run_threaded(
            model,
            dataset,
            hp,
            Strategy::SsdSgd,
            LocalOptimizer::Glu,
            2,
            1,
            true,
            seed,
            total,
        )
        .unwrap();
        assert!(report.final_weight.bits_eq(&det.global_weight()));
    }

    #[test]
    fn threaded_asgd_completes() {
        let seed = 5u64;
        let hp = HyperParams {
            lr: 0.05,
            momentum: 0.9,
            k: 1,
            wp: 0,
            batch_size: 8,
            workers: 4,
            ..HyperParams::default()
        };
        let dataset = make_synthetic(DatasetKind::TwoClass, 128, 6, 0.0, seed).unwrap();
        let mut model = Model::new(ModelKind::LogisticRegression, 6, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.init_params(&mut rng);
        let report = run_threaded(
            model,
            dataset,
            hp,
            Strategy::Asgd,
            LocalOptimizer::Sgd,
            1,
            1,
            true,
            seed,
            25,
        )
        .unwrap();
        assert!(report.final_weight.is_finite());
        assert_eq!(report.iterations, 25);
    }
}
