//! Deterministic in-process training engine.
//!
//! Workers and shards are driven by a single logical clock. Per iteration
//! the scheduler visits workers in a seeded random order, but the order can
//! only affect the message log: synchronous aggregation buffers gradients
//! and folds them by worker id, so trajectories depend only on the seeds.
//!
//! The asynchronous strategy interleaves worker compute and push phases in
//! a seeded random legal order, which is where its weight staleness comes
//! from; with one worker it degenerates to the synchronous trajectory.

use super::message::{Message, MessageKind, MessageLog};
use super::shard::{ParamShard, ServerMode};
use super::worker::{LocalOptimizer, Strategy, WorkerReplica};
use crate::data::Dataset;
use crate::error::{Result, RuntimeError};
use crate::model::Model;
use crate::optim::HyperParams;
use crate::tensor::DenseVec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub strategy: Strategy,
    pub local_optimizer: LocalOptimizer,
    pub servers: u16,
    pub devices_per_worker: usize,
    /// Server momentum also for the asynchronous strategy (kept on by
    /// default for comparability).
    pub asgd_momentum: bool,
    pub scheduler_seed: u64,
    pub batch_seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            strategy: Strategy::Ssgd,
            local_optimizer: LocalOptimizer::Glu,
            servers: 1,
            devices_per_worker: 1,
            asgd_momentum: true,
            scheduler_seed: 0,
            batch_seed: 0,
        }
    }
}

/// The full deterministic system: sharded servers, worker replicas, a
/// message log, and the logical clock.
pub struct Cluster {
    pub hp: HyperParams,
    cfg: ClusterConfig,
    shards: Vec<ParamShard>,
    /// (offset, len) of each shard's slice in the flat parameter vector.
    slices: Vec<(usize, usize)>,
    /// Round-robin shard-to-server assignment, recorded for reporting.
    server_of_key: Vec<u16>,
    workers: Vec<WorkerReplica>,
    dataset: Dataset,
    log: MessageLog,
    clock: u64,
    sched_rng: ChaCha8Rng,
    /// Pending ASGD gradients (worker -> computed gradient awaiting push).
    asgd_pending: Vec<Option<DenseVec>>,
}

impl Cluster {
    /// Builds servers and workers around an initialized model. All workers
    /// start from the model's parameters, which also seed the shards.
    pub fn new(model: Model, dataset: Dataset, hp: HyperParams, cfg: ClusterConfig) -> Self {
        let mode = match cfg.strategy {
            Strategy::Asgd => ServerMode::Asynchronous {
                momentum: cfg.asgd_momentum,
            },
            _ => ServerMode::Synchronous,
        };
        let mut shards = Vec::new();
        let mut slices = Vec::new();
        let mut server_of_key = Vec::new();
        for (i, layer) in model.layer_spec().iter().enumerate() {
            let slice = model.params.as_slice()[layer.offset..layer.offset + layer.len].to_vec();
            shards.push(ParamShard::new(
                i as u32,
                DenseVec::from_vec(slice).expect("initial params are finite"),
                hp.workers,
                mode,
            ));
            slices.push((layer.offset, layer.len));
            server_of_key.push((i % cfg.servers.max(1) as usize) as u16);
        }
        let workers = (0..hp.workers)
            .map(|id| {
                WorkerReplica::new(
                    id,
                    model.clone(),
                    cfg.strategy,
                    cfg.local_optimizer,
                    cfg.devices_per_worker,
                )
            })
            .collect();
        let sched_rng = ChaCha8Rng::seed_from_u64(cfg.scheduler_seed);
        let asgd_pending = vec![None; hp.workers as usize];
        Cluster {
            hp,
            cfg,
            shards,
            slices,
            server_of_key,
            workers,
            dataset,
            log: MessageLog::default(),
            clock: 0,
            sched_rng,
            asgd_pending,
        }
    }

    pub fn log(&self) -> &MessageLog {
        &self.log
    }

    pub fn logical_clock(&self) -> u64 {
        self.clock
    }

    pub fn workers(&self) -> &[WorkerReplica] {
        &self.workers
    }

    pub fn server_of_key(&self) -> &[u16] {
        &self.server_of_key
    }

    /// Iterations completed so far (all workers advance in lockstep except
    /// under the asynchronous strategy, where this is the minimum).
    pub fn iterations_done(&self) -> u64 {
        self.workers.iter().map(|w| w.num).min().unwrap_or(0)
    }

    /// The committed global weight, assembled across shards.
    pub fn global_weight(&self) -> DenseVec {
        let total: usize = self.slices.iter().map(|(_, l)| l).sum();
        let mut out = DenseVec::zeros(total);
        for (shard, (offset, len)) in self.shards.iter().zip(self.slices.iter()) {
            out.as_mut_slice()[*offset..offset + len].copy_from_slice(shard.weight.as_slice());
        }
        out
    }

    fn deliver(&mut self, shard_idx: usize, msg: Message) -> Result<Vec<Message>> {
        self.clock += 1;
        self.log.record(&msg);
        let replies = self.shards[shard_idx].handle(&msg, &self.hp)?;
        self.clock += replies.len() as u64;
        Ok(replies)
    }

    fn push_all_keys(&mut self, worker_idx: usize, grad: &DenseVec) -> Result<()> {
        let iteration = self.workers[worker_idx].num;
        let worker_id = self.workers[worker_idx].worker_id;
        for (key, (offset, len)) in self.slices.clone().into_iter().enumerate() {
            let payload = grad.as_slice()[offset..offset + len].to_vec();
            let msg = Message::push(key as u32, worker_id, iteration, payload);
            self.deliver(key, msg)?;
        }
        Ok(())
    }

    /// Pull every key for a worker; panics on protocol violation if a
    /// synchronous pull is not answerable (engine bug), hence the Result.
    fn pull_all_keys(&mut self, worker_idx: usize) -> Result<DenseVec> {
        let iteration = self.workers[worker_idx].num;
        let worker_id = self.workers[worker_idx].worker_id;
        let total: usize = self.slices.iter().map(|(_, l)| l).sum();
        let mut out = DenseVec::zeros(total);
        for (key, (offset, len)) in self.slices.clone().into_iter().enumerate() {
            let msg = Message::pull_req(key as u32, worker_id, iteration);
            let replies = self.deliver(key, msg)?;
            let resp = replies
                .iter()
                .find(|m| m.kind == MessageKind::PullResp && m.worker_id == worker_id)
                .ok_or_else(|| {
                    RuntimeError::Protocol(format!(
                        "pull for worker {worker_id} iteration {iteration} not ready"
                    ))
                })?;
            if resp.payload.len() != len {
                return Err(RuntimeError::DimensionMismatch(format!(
                    "pull resp len {} != {len}",
                    resp.payload.len()
                )));
            }
            out.as_mut_slice()[offset..offset + len].copy_from_slice(&resp.payload);
        }
        Ok(out)
    }

    fn worker_order(&mut self) -> Vec<usize> {
        let n = self.workers.len();
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates with the scheduler stream
        for i in (1..n).rev() {
            let j = self.sched_rng.gen_range(0..=i);
            order.swap(i, j);
        }
        order
    }

    /// One synchronous round: gradients on the broadcast weights, pushes,
    /// barrier update, then pulls land in both weight slots.
    fn step_ssgd_round(&mut self) -> Result<()> {
        let order = self.worker_order();
        let mut grads: Vec<Option<DenseVec>> = vec![None; self.workers.len()];
        for &i in &order {
            let g = self.workers[i].compute_grad(&self.dataset, &self.hp, self.cfg.batch_seed)?;
            grads[i] = Some(g);
        }
        for &i in &order {
            let g = grads[i].take().expect("computed above");
            self.push_all_keys(i, &g)?;
        }
        for &i in &order {
            let global = self.pull_all_keys(i)?;
            self.workers[i].apply_warmup_pull(global)?;
        }
        Ok(())
    }

    /// One delay-stage round: push and local update from the same gradient,
    /// then the cadence pull overwrites only the update-rule variable.
    fn step_delay_round(&mut self) -> Result<()> {
        let order = self.worker_order();
        let mut grads: Vec<Option<DenseVec>> = vec![None; self.workers.len()];
        for &i in &order {
            let g = self.workers[i].compute_grad(&self.dataset, &self.hp, self.cfg.batch_seed)?;
            grads[i] = Some(g);
        }
        for &i in &order {
            self.push_all_keys(i, grads[i].as_ref().expect("computed above"))?;
        }
        for &i in &order {
            let g = grads[i].take().expect("computed above");
            let hp = self.hp.clone();
            self.workers[i].apply_local_update(&g, &hp)?;
        }
        let pull_now = self.workers[0].wants_pull(&self.hp);
        if pull_now {
            for &i in &order {
                let global = self.pull_all_keys(i)?;
                self.workers[i].apply_delay_pull(global);
            }
        }
        for w in &mut self.workers {
            w.advance();
        }
        Ok(())
    }

    /// One asynchronous round: each worker computes once and pushes once,
    /// in a seeded random legal interleaving. Pull happens right before
    /// compute, so gradients age by however many foreign pushes land in
    /// between.
    fn step_asgd_round(&mut self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Phase {
            NeedCompute,
            NeedPush,
            Done,
        }
        let n = self.workers.len();
        let mut phase = vec![Phase::NeedCompute; n];
        let mut remaining = 2 * n;
        while remaining > 0 {
            let eligible: Vec<usize> = (0..n).filter(|&i| phase[i] != Phase::Done).collect();
            let pick = eligible[self.sched_rng.gen_range(0..eligible.len())];
            match phase[pick] {
                Phase::NeedCompute => {
                    let global = self.pull_all_keys(pick)?;
                    self.workers[pick].model.set_params(global.clone())?;
                    self.workers[pick].local_weight = global;
                    let g = self.workers[pick].compute_grad(
                        &self.dataset,
                        &self.hp,
                        self.cfg.batch_seed,
                    )?;
                    self.asgd_pending[pick] = Some(g);
                    phase[pick] = Phase::NeedPush;
                }
                Phase::NeedPush => {
                    let g = self.asgd_pending[pick].take().expect("phase order");
                    self.push_all_keys(pick, &g)?;
                    self.workers[pick].advance();
                    phase[pick] = Phase::Done;
                }
                Phase::Done => unreachable!(),
            }
            remaining -= 1;
        }
        Ok(())
    }

    /// Advances the whole system by one global iteration.
    pub fn step(&mut self) -> Result<()> {
        match self.cfg.strategy {
            Strategy::Ssgd => self.step_ssgd_round(),
            Strategy::Asgd => self.step_asgd_round(),
            Strategy::SsdSgd => {
                let num = self.workers[0].num;
                if num < self.hp.wp {
                    self.step_ssgd_round()
                } else {
                    if num == self.hp.wp {
                        for w in &mut self.workers {
                            w.begin_delay_stage();
                        }
                    }
                    self.step_delay_round()
                }
            }
        }
    }

    /// Runs the warm-up stage (no-op for strategies without one).
    pub fn run_warmup(&mut self) -> Result<()> {
        if self.cfg.strategy != Strategy::SsdSgd {
            return Ok(());
        }
        while self.iterations_done() < self.hp.wp {
            self.step()?;
        }
        Ok(())
    }
}
