//! The same training run through three transports: the deterministic
//! engine, worker threads over channels, and worker threads over a loopback
//! TCP socket speaking the length-prefixed binary frame format. All three
//! must agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stepdelay::data::{make_synthetic, DatasetKind};
use stepdelay::model::{Model, ModelKind};
use stepdelay::optim::HyperParams;
use stepdelay::runtime::net::{SocketClient, SocketServer};
use stepdelay::runtime::threaded::run_worker_loop;
use stepdelay::runtime::{
    run_threaded, Cluster, ClusterConfig, LocalOptimizer, ParamShard, ServerMode, Strategy,
    WorkerReplica,
};
use stepdelay::tensor::DenseVec;
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 2024u64;
    let iters = 50u64;
    let hp = HyperParams {
        lr: 0.1,
        loc_lr: 0.4,
        alpha: 2.0,
        beta: 0.5,
        wd: 0.0,
        momentum: 0.9,
        k: 5,
        wp: 9,
        batch_size: 16,
        workers: 3,
    };
    let dataset = make_synthetic(DatasetKind::TwoClass, 512, 12, 0.05, seed)?;
    let mut model = Model::new(ModelKind::Mlp2, 12, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.init_params(&mut rng);

    // 1. deterministic engine
    let mut det = Cluster::new(
        model.clone(),
        dataset.clone(),
        hp.clone(),
        ClusterConfig {
            strategy: Strategy::SsdSgd,
            local_optimizer: LocalOptimizer::Glu,
            scheduler_seed: 3,
            batch_seed: seed,
            ..ClusterConfig::default()
        },
    );
    for _ in 0..iters {
        det.step()?;
    }
    let reference = det.global_weight();
    println!("deterministic engine: {} parameters trained", reference.len());

    // 2. threads over channels
    let threaded = run_threaded(
        model.clone(),
        dataset.clone(),
        hp.clone(),
        Strategy::SsdSgd,
        LocalOptimizer::Glu,
        2,
        1,
        true,
        seed,
        iters,
    )?;
    println!(
        "threaded hub: match = {} ({:.2} ms)",
        threaded.final_weight.bits_eq(&reference),
        threaded.elapsed.as_secs_f64() * 1e3
    );

    // 3. threads over loopback TCP
    let mut shards = Vec::new();
    let mut slices = Vec::new();
    for (i, layer) in model.layer_spec().iter().enumerate() {
        let slice = model.params.as_slice()[layer.offset..layer.offset + layer.len].to_vec();
        shards.push(ParamShard::new(
            i as u32,
            DenseVec::from_vec(slice)?,
            hp.workers,
            ServerMode::Synchronous,
        ));
        slices.push((layer.offset, layer.len));
    }
    let server = SocketServer::spawn(shards, hp.clone())?;
    let addr = server.addr();
    println!("socket server on {addr}");
    let dataset = Arc::new(dataset);
    let slices = Arc::new(slices);
    let mut handles = Vec::new();
    for w in 0..hp.workers {
        let model = model.clone();
        let hp = hp.clone();
        let dataset = Arc::clone(&dataset);
        let slices = Arc::clone(&slices);
        handles.push(std::thread::spawn(move || {
            let mut client = SocketClient::connect(addr).expect("connect");
            let mut replica =
                WorkerReplica::new(w, model, Strategy::SsdSgd, LocalOptimizer::Glu, 1);
            run_worker_loop(&mut client, &mut replica, &dataset, &hp, seed, &slices, iters)
                .expect("worker loop");
        }));
    }
    for h in handles {
        h.join().expect("worker thread");
    }
    let shards = server.shutdown()?;
    let mut from_socket = DenseVec::zeros(reference.len());
    for (shard, (offset, len)) in shards.iter().zip(slices.iter()) {
        from_socket.as_mut_slice()[*offset..offset + len].copy_from_slice(shard.weight.as_slice());
    }
    println!("socket transport: match = {}", from_socket.bits_eq(&reference));

    assert!(threaded.final_weight.bits_eq(&reference));
    assert!(from_socket.bits_eq(&reference));
    println!("all transports agree bit for bit");
    Ok(())
}
