//! Transport parity: the same training run must produce bit-identical
//! trajectories through the deterministic engine, the threaded channel hub,
//! and the loopback socket server.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stepdelay::data::{make_synthetic, DatasetKind};
use stepdelay::model::{Model, ModelKind};
use stepdelay::optim::HyperParams;
use stepdelay::runtime::net::{SocketClient, SocketServer};
use stepdelay::runtime::threaded::run_worker_loop;
use stepdelay::runtime::{
    Cluster, ClusterConfig, LocalOptimizer, ParamShard, ServerMode, Strategy, WorkerReplica,
};
use stepdelay::tensor::DenseVec;
use std::sync::Arc;

fn hp() -> HyperParams {
    HyperParams {
        lr: 0.1,
        loc_lr: 0.4,
        alpha: 2.0,
        beta: 0.5,
        wd: 1e-4,
        momentum: 0.9,
        k: 3,
        wp: 5,
        batch_size: 8,
        workers: 2,
    }
}

#[test]
fn socket_transport_matches_deterministic_engine() {
    let seed = 4242u64;
    let hp = hp();
    let total_iters = 20u64;
    let dataset = make_synthetic(DatasetKind::TwoClass, 128, 6, 0.05, seed).unwrap();
    let mut model = Model::new(ModelKind::Mlp2, 6, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.init_params(&mut rng);

    // reference trajectory from the deterministic engine
    let mut det = Cluster::new(
        model.clone(),
        dataset.clone(),
        hp.clone(),
        ClusterConfig {
            strategy: Strategy::SsdSgd,
            local_optimizer: LocalOptimizer::Glu,
            scheduler_seed: 7,
            batch_seed: seed,
            ..ClusterConfig::default()
        },
    );
    for _ in 0..total_iters {
        det.step().unwrap();
    }
    let want = det.global_weight();

    // same run, but over loopback TCP
    let mut shards = Vec::new();
    let mut slices = Vec::new();
    for (i, layer) in model.layer_spec().iter().enumerate() {
        let slice = model.params.as_slice()[layer.offset..layer.offset + layer.len].to_vec();
        shards.push(ParamShard::new(
            i as u32,
            DenseVec::from_vec(slice).unwrap(),
            hp.workers,
            ServerMode::Synchronous,
        ));
        slices.push((layer.offset, layer.len));
    }
    let server = SocketServer::spawn(shards, hp.clone()).unwrap();
    let addr = server.addr();
    let dataset = Arc::new(dataset);
    let slices = Arc::new(slices);
    let mut handles = Vec::new();
    for w in 0..hp.workers {
        let model = model.clone();
        let hp = hp.clone();
        let dataset = Arc::clone(&dataset);
        let slices = Arc::clone(&slices);
        handles.push(std::thread::spawn(move || {
            let mut client = SocketClient::connect(addr).unwrap();
            let mut replica =
                WorkerReplica::new(w, model, Strategy::SsdSgd, LocalOptimizer::Glu, 1);
            run_worker_loop(
                &mut client,
                &mut replica,
                &dataset,
                &hp,
                seed,
                &slices,
                total_iters,
            )
            .unwrap();
        }));
    }
    for h in handles {
        h.join().unwrap();
    }
    let shards = server.shutdown().unwrap();
    let total: usize = slices.iter().map(|(_, l)| l).sum();
    let mut got = DenseVec::zeros(total);
    for (shard, (offset, len)) in shards.iter().zip(slices.iter()) {
        got.as_mut_slice()[*offset..offset + len].copy_from_slice(shard.weight.as_slice());
    }
    assert!(
        got.bits_eq(&want),
        "socket trajectory diverged from the deterministic engine"
    );
}

#[test]
fn socket_transport_handles_many_keys_and_pull_barriers() {
    // A pull issued by a fast worker before the slow worker's push must be
    // deferred across connections and still arrive.
    let seed = 99u64;
    let mut hp = hp();
    hp.k = 1;
    hp.wp = 0;
    let total_iters = 6u64;
    let dataset = make_synthetic(DatasetKind::TwoClass, 64, 5, 0.0, seed).unwrap();
    let mut model = Model::new(ModelKind::LogisticRegression, 5, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.init_params(&mut rng);

    let mut shards = Vec::new();
    let mut slices = Vec::new();
    for (i, layer) in model.layer_spec().iter().enumerate() {
        let slice = model.params.as_slice()[layer.offset..layer.offset + layer.len].to_vec();
        shards.push(ParamShard::new(
            i as u32,
            DenseVec::from_vec(slice).unwrap(),
            hp.workers,
            ServerMode::Synchronous,
        ));
        slices.push((layer.offset, layer.len));
    }
    let server = SocketServer::spawn(shards, hp.clone()).unwrap();
    let addr = server.addr();
    let dataset = Arc::new(dataset);
    let slices = Arc::new(slices);
    let mut handles = Vec::new();
    for w in 0..hp.workers {
        let model = model.clone();
        let hp = hp.clone();
        let dataset = Arc::clone(&dataset);
        let slices = Arc::clone(&slices);
        handles.push(std::thread::spawn(move || {
            // stagger startup to force cross-connection deferred pulls
            if w == 1 {
                std::thread::sleep(std::time::Duration::from_millis(30));
            }
            let mut client = SocketClient::connect(addr).unwrap();
            let mut replica =
                WorkerReplica::new(w, model, Strategy::SsdSgd, LocalOptimizer::Sgd, 1);
            run_worker_loop(
                &mut client,
                &mut replica,
                &dataset,
                &hp,
                seed,
                &slices,
                total_iters,
            )
            .unwrap();
        }));
    }
    for h in handles {
        h.join().unwrap();
    }
    let shards = server.shutdown().unwrap();
    assert!(shards.iter().all(|s| s.committed() == total_iters));
}
