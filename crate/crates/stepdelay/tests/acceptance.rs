//! Acceptance suite: one test per criterion, each printing a pass line with
//! its measured runtime and asserting the stated tolerance and budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepdelay::config::{compatible_warmup, ExperimentConfig};
use stepdelay::data::{make_synthetic, DatasetKind};
use stepdelay::experiment::{run_experiment, run_training};
use stepdelay::metrics::to_csv;
use stepdelay::model::{Model, ModelKind};
use stepdelay::optim::{
    glu_grad_sync, server_momentum_update, GluState, HyperParams, ServerOptState,
};
use stepdelay::pipeline::profile::sample;
use stepdelay::pipeline::{
    delta_t_k, simulate_pipeline, ssd_avg_iter_time, ssgd_iter_time, SimStrategy,
};
use stepdelay::runtime::{Cluster, ClusterConfig, LocalOptimizer, Strategy};
use stepdelay::tensor::{DenseMat, DenseVec, Minibatch};
use std::time::Instant;

/// Criterion-5 experimental setup, shared by criteria 5 and 6.
fn parity_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelKind::LogisticRegression,
        dataset_kind: DatasetKind::TwoClass,
        samples: 4096,
        dim: 32,
        noise: 0.05,
        hp: HyperParams {
            lr: 0.05,
            loc_lr: 0.2, // 4x the global rate
            alpha: 2.0,
            beta: 0.5,
            wd: 0.0,
            momentum: 0.9,
            k: 1,
            wp: 99,
            batch_size: 32,
            workers: 4,
        },
        strategy: Strategy::Ssgd,
        local_optimizer: LocalOptimizer::Glu,
        servers: 2,
        iterations: 2000,
        eval_interval: 500,
        seed,
        deterministic: true,
        ..ExperimentConfig::default()
    }
}

fn pass(criterion: u32, what: &str, started: Instant, budget_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    println!("PASS criterion {criterion}: {what} ({elapsed:.2}s)");
    assert!(
        elapsed < budget_s,
        "criterion {criterion} exceeded its {budget_s}s budget: {elapsed:.2}s"
    );
}

fn finite_diff(model: &Model, batch: &Minibatch, eps: f64) -> DenseVec {
    let mut grads = Vec::with_capacity(model.param_len());
    for i in 0..model.param_len() {
        let mut plus = model.clone();
        plus.params[i] += eps;
        let mut minus = model.clone();
        minus.params[i] -= eps;
        let fp = plus.forward_loss(batch).unwrap();
        let fm = minus.forward_loss(batch).unwrap();
        grads.push((fp - fm) / (2.0 * eps));
    }
    DenseVec::from_vec(grads).unwrap()
}

#[test]
fn criterion_01_gradient_correctness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for kind in [
        ModelKind::LinearRegression,
        ModelKind::LogisticRegression,
        ModelKind::Mlp2,
    ] {
        for _ in 0..100 {
            let d = rng.gen_range(3..10);
            let b = rng.gen_range(1..12);
            let mut model = Model::new(kind, d, 6);
            model.init_params(&mut rng);
            let rows: Vec<f64> = (0..b * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let labels: Vec<f64> = (0..b)
                .map(|_| match kind {
                    ModelKind::LinearRegression => rng.gen_range(-2.0..2.0),
                    _ => {
                        if rng.gen_bool(0.5) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                })
                .collect();
            let batch = Minibatch::new(
                DenseMat::from_vec(rows, b, d).unwrap(),
                DenseVec::from_vec(labels).unwrap(),
            )
            .unwrap();
            let grad = model.backward_grad(&batch).unwrap();
            let fd = finite_diff(&model, &batch, 1e-6);
            let err = grad.max_rel_error(&fd);
            assert!(err <= 1e-5, "{kind:?}: rel error {err}");
        }
    }
    pass(
        1,
        "analytic gradients match central finite differences to 1e-5 on 100 pairs per model",
        started,
        10.0,
    );
}

#[test]
fn criterion_02_grad_sync_oracle() {
    let started = Instant::now();
    let hp = HyperParams {
        lr: 0.1,
        momentum: 0.9,
        wd: 0.0,
        ..HyperParams::default()
    };
    let grad = DenseVec::from_vec(vec![1.0]).unwrap();
    let mut w = DenseVec::zeros(1);
    let mut state = ServerOptState::new(1);
    let mut history = vec![w[0]];
    for _ in 0..500 {
        server_momentum_update(&mut w, &grad, &mut state, &hp).unwrap();
        history.push(w[0]);
    }
    let t = history.len() - 1;
    for k in [1u64, 5] {
        let hp_k = HyperParams { k, ..hp.clone() };
        let pre = DenseVec::from_vec(vec![history[t - k as usize]]).unwrap();
        let cur = DenseVec::from_vec(vec![history[t]]).unwrap();
        let gs = glu_grad_sync(&cur, &GluState::new(pre), &hp_k);
        let rel = (gs[0] - 1.0).abs();
        assert!(rel <= 1e-3, "k={k}: grad_sync {} (rel {rel})", gs[0]);
    }
    pass(
        2,
        "grad_sync recovers a constant gradient to 1e-3 after 500 momentum steps for k in {1,5}",
        started,
        1.0,
    );
}

#[test]
fn criterion_03_warmup_equivalence() {
    let started = Instant::now();
    for seed in [11u64, 23, 37, 41, 59] {
        for wp in [9u64, 99] {
            for workers in [1u16, 4] {
                let dataset = make_synthetic(DatasetKind::TwoClass, 256, 8, 0.05, seed).unwrap();
                let mut model = Model::new(ModelKind::LogisticRegression, 8, 0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5150);
                model.init_params(&mut rng);
                let hp = HyperParams {
                    lr: 0.1,
                    loc_lr: 0.4,
                    momentum: 0.9,
                    k: 5,
                    wp,
                    batch_size: 8,
                    workers,
                    ..HyperParams::default()
                };
                let mk = |strategy| {
                    Cluster::new(
                        model.clone(),
                        dataset.clone(),
                        hp.clone(),
                        ClusterConfig {
                            strategy,
                            local_optimizer: LocalOptimizer::Glu,
                            scheduler_seed: seed,
                            batch_seed: seed.wrapping_mul(97),
                            ..ClusterConfig::default()
                        },
                    )
                };
                let mut ssd = mk(Strategy::SsdSgd);
                let mut ssgd = mk(Strategy::Ssgd);
                for it in 0..wp {
                    ssd.step().unwrap();
                    ssgd.step().unwrap();
                    assert!(
                        ssd.global_weight().bits_eq(&ssgd.global_weight()),
                        "seed {seed} wp {wp} workers {workers} iteration {it}"
                    );
                }
            }
        }
    }
    pass(
        3,
        "warm-up trajectories bitwise equal synchronous SGD for 5 seeds, wp in {9,99}, K in {1,4}",
        started,
        30.0,
    );
}

#[test]
fn criterion_04_pull_sparsity() {
    let started = Instant::now();
    let t = 1000u64;
    for k in 1u64..=5 {
        let wp = k - 1; // smallest cadence-compatible warm-up
        let seed = 77 + k;
        let dataset = make_synthetic(DatasetKind::TwoClass, 128, 6, 0.05, seed).unwrap();
        let mut model = Model::new(ModelKind::LogisticRegression, 6, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.init_params(&mut rng);
        let hp = HyperParams {
            lr: 0.05,
            loc_lr: 0.2,
            momentum: 0.9,
            k,
            wp,
            batch_size: 8,
            workers: 2,
            ..HyperParams::default()
        };
        let mut cluster = Cluster::new(
            model,
            dataset,
            hp.clone(),
            ClusterConfig {
                strategy: Strategy::SsdSgd,
                local_optimizer: LocalOptimizer::Glu,
                scheduler_seed: seed,
                batch_seed: seed,
                ..ClusterConfig::default()
            },
        );
        cluster.run_warmup().unwrap();
        for _ in 0..t {
            cluster.step().unwrap();
        }
        for w in 0..hp.workers {
            let pushes = cluster.log().push_rounds(w, wp);
            let pulls = cluster.log().pull_rounds(w, wp);
            assert_eq!(pushes, t, "k={k} worker {w}: pushes");
            assert_eq!(pulls, t.div_ceil(k), "k={k} worker {w}: pulls");
        }
    }
    pass(
        4,
        "per-worker message logs show 1000 pushes and ceil(1000/k) pulls for k in 1..5",
        started,
        30.0,
    );
}

#[test]
fn criterion_05_convergence_parity() {
    let started = Instant::now();
    let seed = 1u64;
    let mut ssgd_cfg = parity_config(seed);
    ssgd_cfg.strategy = Strategy::Ssgd;
    let ssgd = run_training(&ssgd_cfg).unwrap();
    for k in 1u64..=5 {
        let mut cfg = parity_config(seed);
        cfg.strategy = Strategy::SsdSgd;
        cfg.hp.k = k;
        cfg.hp.wp = compatible_warmup(99, k);
        let ssd = run_training(&cfg).unwrap();
        let rel = (ssd.final_loss - ssgd.final_loss).abs() / ssgd.final_loss;
        assert!(
            rel <= 0.05,
            "k={k}: final loss {} vs ssgd {} (rel {rel:.4})",
            ssd.final_loss,
            ssgd.final_loss
        );
    }
    pass(
        5,
        "delayed-pull final loss within 5% of synchronous SGD for k in 1..5",
        started,
        120.0,
    );
}

#[test]
fn criterion_06_glu_beats_plain_local_sgd() {
    let started = Instant::now();
    let mut wins = 0;
    for seed in [1u64, 2, 3, 4, 5] {
        let mut base = parity_config(seed);
        base.strategy = Strategy::SsdSgd;
        base.hp.k = 5;
        base.hp.wp = 99;
        let mut glu_cfg = base.clone();
        glu_cfg.local_optimizer = LocalOptimizer::Glu;
        let mut sgd_cfg = base;
        sgd_cfg.local_optimizer = LocalOptimizer::Sgd;
        let glu = run_training(&glu_cfg).unwrap();
        let sgd = run_training(&sgd_cfg).unwrap();
        if glu.final_loss <= sgd.final_loss {
            wins += 1;
        }
        println!(
            "  seed {seed}: glu {:.6} vs local-sgd {:.6}",
            glu.final_loss, sgd.final_loss
        );
    }
    assert!(wins >= 4, "GLU won only {wins}/5 seeds");
    pass(
        6,
        "GLU final loss beats plain local SGD at k=5 in at least 4 of 5 seeds",
        started,
        120.0,
    );
}

#[test]
fn criterion_07_timing_model_validity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for trial in 0..20 {
        for profile in [sample::case1(&mut rng), sample::case2(&mut rng)] {
            let ssgd_sim = simulate_pipeline(&profile, SimStrategy::Ssgd, 1, 30).avg_iter_time;
            let ssgd_analytic = ssgd_iter_time(&profile);
            assert!(
                (ssgd_sim - ssgd_analytic).abs() <= 1e-9,
                "trial {trial}: ssgd {ssgd_sim} vs {ssgd_analytic}"
            );
            for k in 1u64..=5 {
                let (analytic, _) = ssd_avg_iter_time(&profile, k);
                let sim = simulate_pipeline(&profile, SimStrategy::SsdSgd, k, 14 * k as usize)
                    .avg_iter_time;
                let rel = (analytic - sim).abs() / sim;
                assert!(
                    rel <= 0.01,
                    "trial {trial} k={k}: analytic {analytic} vs simulated {sim} (rel {rel:.4})"
                );
            }
        }
    }
    pass(
        7,
        "averaged iteration-time formulas within 1% of the event simulator on 20+20 profiles; \
         synchronous formula exact to 1e-9",
        started,
        10.0,
    );
}

#[test]
fn criterion_08_saving_identity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for i in 0..50 {
        let profile = if i % 2 == 0 {
            sample::case1_send_half(&mut rng)
        } else {
            let mut p = sample::case2(&mut rng);
            sample::force_send_half_of_comm(&mut p);
            p
        };
        assert!((profile.total_send() - profile.total_comm() / 2.0).abs() < 1e-9);
        for k in 1u64..=5 {
            let kf = k as f64;
            let lhs = delta_t_k(&profile, k);
            let (avg, _) = ssd_avg_iter_time(&profile, k);
            let rhs = kf * ssgd_iter_time(&profile) - kf * avg;
            assert!(
                (lhs - rhs).abs() <= 1e-9,
                "profile {i} k={k}: {lhs} vs {rhs}"
            );
        }
    }
    pass(
        8,
        "closed-form k-iteration saving equals k*(sync) - k*(delayed avg) to 1e-9 under the \
         send-half pin on 50 profiles",
        started,
        10.0,
    );
}

#[test]
fn criterion_09_speedup_property() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for trial in 0..5 {
        let profile = sample::case2(&mut rng);
        // send-bound regime by construction
        assert!(
            profile.total_send()
                >= profile.total_backward() + profile.forward + profile.local_update[0]
        );
        let ssgd = simulate_pipeline(&profile, SimStrategy::Ssgd, 1, 30).avg_iter_time;
        let mut last = 0.0;
        for k in 1u64..=5 {
            let ssd =
                simulate_pipeline(&profile, SimStrategy::SsdSgd, k, 14 * k as usize).avg_iter_time;
            let speedup = ssgd / ssd;
            assert!(
                speedup >= last - 1e-9,
                "trial {trial}: speedup fell from {last} to {speedup} at k={k}"
            );
            last = speedup;
        }
        assert!(
            last >= 1.5,
            "trial {trial}: k=5 speedup {last} below 1.5x"
        );
    }
    pass(
        9,
        "send-bound profiles reach >= 1.5x simulated speedup at k=5, non-decreasing in k",
        started,
        10.0,
    );
}

#[test]
fn criterion_10_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    for strategy in [Strategy::Ssgd, Strategy::SsdSgd, Strategy::Asgd] {
        let mut cfg = parity_config(9);
        cfg.strategy = strategy;
        cfg.hp.k = if strategy == Strategy::SsdSgd { 4 } else { 1 };
        cfg.iterations = 300;
        cfg.eval_interval = 50;
        cfg.deterministic = true;
        cfg.out_dir = Some(dir.path().join(strategy.name()));
        let (a, path_a) = run_experiment(&cfg).unwrap();
        let bytes_a = std::fs::read(path_a.as_ref().unwrap()).unwrap();
        let (b, path_b) = run_experiment(&cfg).unwrap();
        let bytes_b = std::fs::read(path_b.as_ref().unwrap()).unwrap();
        assert_eq!(bytes_a, bytes_b, "{}: CSV bytes differ", strategy.name());
        assert_eq!(to_csv(&a.records), to_csv(&b.records));
        assert!(a.final_weight.bits_eq(&b.final_weight));
    }
    pass(
        10,
        "identical configs in deterministic mode produce byte-identical CSVs for all strategies",
        started,
        60.0,
    );
}
