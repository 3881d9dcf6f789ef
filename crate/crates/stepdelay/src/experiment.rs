//! Experiment drivers: training runs, k sweeps, timing studies, and
//! profile measurement.

use crate::config::{compatible_warmup, ExperimentConfig};
use crate::data::{lanes, make_synthetic, split_seed, Dataset};
use crate::error::{Result, RuntimeError};
use crate::metrics::MetricRecord;
use crate::model::Model;
use crate::pipeline::{
    simulate_pipeline, ssd_avg_iter_time, ssgd_iter_time, PipelineCase, SimStrategy, TimingProfile,
};
use crate::runtime::{Cluster, ClusterConfig, Strategy};
use crate::tensor::DenseVec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricRecord>,
    pub final_weight: DenseVec,
    pub final_loss: f64,
    pub final_accuracy: Option<f64>,
    /// Wall seconds (real time, regardless of mode).
    pub elapsed_s: f64,
    pub config: ExperimentConfig,
}

impl RunOutput {
    pub fn summary_line(&self) -> String {
        let acc = self
            .final_accuracy
            .map(|a| format!("{:.4}", a))
            .unwrap_or_else(|| "-".into());
        format!(
            "strategy={} k={} iters={} final_loss={:.6} final_acc={} avg_iter_ms={:.4}",
            self.config.strategy.name(),
            self.config.hp.k,
            self.config.iterations,
            self.final_loss,
            acc,
            1e3 * self.elapsed_s / self.config.iterations as f64
        )
    }
}

fn build_model(cfg: &ExperimentConfig) -> Model {
    let mut model = Model::new(cfg.model, cfg.dim, cfg.hidden);
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, lanes::INIT));
    model.init_params(&mut rng);
    model
}

fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    make_synthetic(
        cfg.dataset_kind,
        cfg.samples,
        cfg.dim,
        cfg.noise,
        split_seed(cfg.seed, lanes::DATASET),
    )
}

/// Runs training under the configured strategy and collects one metric
/// record per evaluation interval. The deterministic engine is used when
/// `deterministic` is set; otherwise the run still goes through the same
/// engine but reports real wall time (the threaded transport is exercised
/// separately and used for throughput studies).
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()
        .map_err(|e| RuntimeError::Protocol(e.to_string()))?;
    let dataset = build_dataset(cfg)?;
    let model = build_model(cfg);
    let mut eval_model = model.clone();
    let full_batch = dataset.full_batch();

    let cluster_cfg = ClusterConfig {
        strategy: cfg.strategy,
        local_optimizer: cfg.local_optimizer,
        servers: cfg.servers,
        devices_per_worker: cfg.devices_per_worker,
        asgd_momentum: cfg.asgd_momentum,
        scheduler_seed: split_seed(cfg.seed, lanes::SCHEDULER),
        batch_seed: split_seed(cfg.seed, lanes::BATCHES),
    };
    let mut cluster = Cluster::new(model, dataset, cfg.hp.clone(), cluster_cfg);

    // simulated per-iteration time when a profile is attached
    let sim_avg = match &cfg.profile {
        Some(path) => {
            let profile = TimingProfile::load(path)?;
            let (strategy, k) = match cfg.strategy {
                Strategy::SsdSgd => (SimStrategy::SsdSgd, cfg.hp.k),
                _ => (SimStrategy::Ssgd, 1),
            };
            let n = (14 * cfg.hp.k as usize).max(40);
            Some(simulate_pipeline(&profile, strategy, k, n).avg_iter_time)
        }
        None => None,
    };

    let started = std::time::Instant::now();
    let mut records = Vec::new();
    let samples_per_iter = cfg.hp.batch_size as u64 * cfg.hp.workers as u64;
    for iter in 0..cfg.iterations {
        cluster.step()?;
        let done = iter + 1;
        if done % cfg.eval_interval == 0 || done == cfg.iterations {
            let weight = cluster.global_weight();
            if !weight.is_finite() {
                return Err(RuntimeError::NonFinite(format!(
                    "global weight at iteration {done}"
                )));
            }
            eval_model.set_params(weight)?;
            let train_loss = eval_model.forward_loss(&full_batch)?;
            let eval_accuracy = eval_model.accuracy(&full_batch);
            let wall_time_s = if cfg.deterministic {
                // logical clock: message deliveries so far
                cluster.logical_clock() as f64
            } else {
                started.elapsed().as_secs_f64()
            };
            let pushes: u64 = (0..cfg.hp.workers)
                .map(|w| cluster.log().push_rounds(w, 0))
                .sum();
            let pulls: u64 = (0..cfg.hp.workers)
                .map(|w| cluster.log().pull_rounds(w, 0))
                .sum();
            records.push(MetricRecord {
                iteration: done,
                epoch: done * samples_per_iter / cfg.samples as u64,
                train_loss,
                eval_accuracy,
                wall_time_s,
                sim_time: sim_avg.map(|a| a * done as f64),
                pushes,
                pulls,
            });
        }
    }

    let final_weight = cluster.global_weight();
    eval_model.set_params(final_weight.clone())?;
    let final_loss = eval_model.forward_loss(&full_batch)?;
    let final_accuracy = eval_model.accuracy(&full_batch);
    Ok(RunOutput {
        records,
        final_weight,
        final_loss,
        final_accuracy,
        elapsed_s: started.elapsed().as_secs_f64(),
        config: cfg.clone(),
    })
}

/// Asynchronous baseline entry point.
pub fn run_asgd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut cfg = cfg.clone();
    cfg.strategy = Strategy::Asgd;
    run_training(&cfg)
}

/// Runs one experiment and writes `<out>/<name>.csv`, returning the path.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunOutput, Option<PathBuf>)> {
    let output = run_training(cfg)?;
    let path = match &cfg.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let name = format!(
                "{}_k{}_seed{}.csv",
                cfg.strategy.name(),
                cfg.hp.k,
                cfg.seed
            );
            let path = dir.join(name);
            crate::metrics::write_csv(&path, &output.records)?;
            Some(path)
        }
        None => None,
    };
    Ok((output, path))
}

/// One row of a k sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub k: u64,
    pub warmup: u64,
    pub final_loss: f64,
    pub final_accuracy: Option<f64>,
    pub csv: Option<PathBuf>,
}

/// Sweeps the delay steps over `k_range`, adjusting the warm-up length down
/// to the nearest cadence-compatible value for each k.
pub fn run_k_sweep(
    base: &ExperimentConfig,
    k_range: std::ops::RangeInclusive<u64>,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for k in k_range {
        let mut cfg = base.clone();
        cfg.hp.k = k;
        cfg.hp.wp = compatible_warmup(base.hp.wp, k);
        let (output, csv) = run_experiment(&cfg)?;
        rows.push(SweepRow {
            k,
            warmup: cfg.hp.wp,
            final_loss: output.final_loss,
            final_accuracy: output.final_accuracy,
            csv,
        });
    }
    Ok(rows)
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("k  warmup  final_loss    final_acc\n");
    for r in rows {
        let acc = r
            .final_accuracy
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{:<2} {:<7} {:<13.6} {}", r.k, r.warmup, r.final_loss, acc);
    }
    out
}

/// One row of a timing study.
#[derive(Debug, Clone)]
pub struct TimingRow {
    pub k: u64,
    pub analytic: f64,
    pub simulated: f64,
    pub speedup_analytic: f64,
    pub speedup_simulated: f64,
    pub case: PipelineCase,
}

/// Compares the closed-form average iteration time against the simulator
/// for each k, reporting speedups relative to the synchronous baseline.
pub fn run_timing_study(
    profile: &TimingProfile,
    k_range: std::ops::RangeInclusive<u64>,
) -> Result<Vec<TimingRow>> {
    profile
        .validate()
        .map_err(|e| RuntimeError::Protocol(e.to_string()))?;
    let ssgd_analytic = ssgd_iter_time(profile);
    let ssgd_sim = simulate_pipeline(profile, SimStrategy::Ssgd, 1, 40).avg_iter_time;
    let mut rows = Vec::new();
    for k in k_range {
        let (analytic, case) = ssd_avg_iter_time(profile, k);
        let n = (14 * k as usize).max(40);
        let simulated = simulate_pipeline(profile, SimStrategy::SsdSgd, k, n).avg_iter_time;
        rows.push(TimingRow {
            k,
            analytic,
            simulated,
            speedup_analytic: ssgd_analytic / analytic,
            speedup_simulated: ssgd_sim / simulated,
            case,
        });
    }
    Ok(rows)
}

pub fn timing_table(rows: &[TimingRow]) -> String {
    let mut out =
        String::from("k  analytic    simulated   speedup(analytic)  speedup(simulated)  case\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<2} {:<11.6} {:<11.6} {:<18.4} {:<19.4} {}",
            r.k, r.analytic, r.simulated, r.speedup_analytic, r.speedup_simulated, r.case
        );
    }
    out
}

/// Measures a timing profile from live single-worker iterations: forward and
/// backward wall time (backward attributed to layers by parameter share),
/// per-key push/pull transfer time against an in-memory shard set, and the
/// local update cost. Synchronization and server update cost are folded into
/// the measured pull on this in-process transport and reported as zero.
pub fn measure_profile(cfg: &ExperimentConfig, iters: u64) -> Result<TimingProfile> {
    let dataset = build_dataset(cfg)?;
    let model = build_model(cfg);
    let layers = model.layer_spec().to_vec();
    let l = layers.len();
    let batch_seed = split_seed(cfg.seed, lanes::BATCHES);

    let cluster_cfg = ClusterConfig {
        strategy: Strategy::SsdSgd,
        local_optimizer: cfg.local_optimizer,
        servers: cfg.servers,
        scheduler_seed: split_seed(cfg.seed, lanes::SCHEDULER),
        batch_seed,
        ..ClusterConfig::default()
    };
    let mut hp = cfg.hp.clone();
    hp.workers = 1;
    hp.wp = compatible_warmup(hp.wp.min(4), hp.k);
    let mut cluster = Cluster::new(model.clone(), dataset.clone(), hp.clone(), cluster_cfg);

    // forward/backward, timed directly on the model
    let probe = model.clone();
    let batch = dataset.minibatch(&crate::data::batch_indices(
        batch_seed,
        0,
        0,
        hp.batch_size,
        dataset.len(),
    ));
    let t0 = std::time::Instant::now();
    for _ in 0..iters {
        probe.forward_loss(&batch)?;
    }
    let forward = t0.elapsed().as_secs_f64() / iters as f64;
    let t0 = std::time::Instant::now();
    for _ in 0..iters {
        probe.backward_grad(&batch)?;
    }
    let backward_total = (t0.elapsed().as_secs_f64() / iters as f64 - forward).max(0.0);
    let total_params: usize = layers.iter().map(|la| la.len).sum();
    let backward: Vec<f64> = layers
        .iter()
        .map(|la| backward_total * la.len as f64 / total_params as f64)
        .collect();

    // local update cost, attributed by parameter share
    let mut w = model.params.clone();
    let grad = probe.backward_grad(&batch)?;
    let t0 = std::time::Instant::now();
    for _ in 0..iters {
        crate::optim::local_sgd_update(&mut w, &grad, &hp)?;
    }
    let loc_total = t0.elapsed().as_secs_f64() / iters as f64;
    let local_update: Vec<f64> = layers
        .iter()
        .map(|la| loc_total * la.len as f64 / total_params as f64)
        .collect();

    // push/pull wall time through the engine, attributed by parameter share
    let t0 = std::time::Instant::now();
    for _ in 0..iters.min(50) {
        cluster.step()?;
    }
    let step_total = t0.elapsed().as_secs_f64() / iters.min(50) as f64;
    let comm_total = (step_total - forward - backward_total - loc_total).max(0.0);
    let send: Vec<f64> = layers
        .iter()
        .map(|la| 0.5 * comm_total * la.len as f64 / total_params as f64)
        .collect();
    let retrieve: Vec<f64> = layers
        .iter()
        .map(|la| 0.5 * comm_total * la.len as f64 / total_params as f64)
        .collect();

    let profile = TimingProfile {
        forward,
        backward,
        send,
        retrieve,
        sync_wait: vec![0.0; l],
        server_update: vec![0.0; l],
        local_update,
    };
    profile
        .validate()
        .map_err(|e| RuntimeError::Protocol(e.to_string()))?;
    Ok(profile)
}

/// Convenience loader used by the CLI and examples.
pub fn load_profile(path: &Path) -> Result<TimingProfile> {
    TimingProfile::load(path)
}
