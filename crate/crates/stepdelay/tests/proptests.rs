//! Property tests for the crate's structural invariants.

use proptest::prelude::*;
use stepdelay::metrics::{from_csv, to_csv, MetricRecord};
use stepdelay::model::{Model, ModelKind};
use stepdelay::optim::{
    glu_local_update, local_sgd_update, server_momentum_update, GluState, HyperParams,
    ServerOptState,
};
use stepdelay::pipeline::profile::sample;
use stepdelay::pipeline::{classify, ssd_avg_iter_time, PipelineCase};
use stepdelay::runtime::wire;
use stepdelay::runtime::Message;
use stepdelay::tensor::DenseVec;

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Wire frames preserve every payload bit pattern, including NaNs.
    #[test]
    fn wire_round_trip_is_bit_exact(
        kind_code in 0u8..4,
        key in any::<u32>(),
        worker in any::<u16>(),
        iteration in any::<u64>(),
        payload_bits in prop::collection::vec(any::<u64>(), 0..32),
    ) {
        let payload: Vec<f64> = payload_bits.iter().map(|b| f64::from_bits(*b)).collect();
        let msg = Message {
            kind: stepdelay::runtime::MessageKind::from_code(kind_code).unwrap(),
            key,
            worker_id: worker,
            iteration,
            payload,
        };
        let bytes = wire::encode(&msg);
        let back = wire::decode(&bytes[4..]).unwrap();
        prop_assert_eq!(back.kind, msg.kind);
        prop_assert_eq!(back.key, msg.key);
        prop_assert_eq!(back.worker_id, msg.worker_id);
        prop_assert_eq!(back.iteration, msg.iteration);
        let a: Vec<u64> = back.payload.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, payload_bits);
    }

    /// CSV emission parses back to the same records.
    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(
            (1u64..1_000_000, finite_f64(), prop::option::of(0.0f64..1.0),
             finite_f64(), prop::option::of(finite_f64()), 0u64..10_000),
            0..20,
        )
    ) {
        let mut iteration = 0;
        let records: Vec<MetricRecord> = rows
            .into_iter()
            .map(|(step, loss, acc, wall, sim, pulls)| {
                iteration += step;
                MetricRecord {
                    iteration,
                    epoch: iteration / 7,
                    train_loss: loss,
                    eval_accuracy: acc,
                    wall_time_s: wall,
                    sim_time: sim,
                    pushes: pulls * 2 + 1,
                    pulls,
                }
            })
            .collect();
        let csv = to_csv(&records);
        prop_assert_eq!(from_csv(&csv).unwrap(), records);
    }

    /// GLU with alpha=1, beta=0, wd=0 is bitwise plain local SGD on any
    /// trajectory.
    #[test]
    fn glu_degenerates_to_local_sgd(
        w0 in prop::collection::vec(-10.0f64..10.0, 1..8),
        grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..8), 1..30),
        loc_lr in 0.001f64..0.5,
        k in 1u64..6,
    ) {
        let dim = w0.len();
        let hp = HyperParams {
            alpha: 1.0,
            beta: 0.0,
            wd: 0.0,
            loc_lr,
            k,
            wp: k - 1,
            ..HyperParams::default()
        };
        let mut w_glu = DenseVec::from_vec(w0.clone()).unwrap();
        let mut w_sgd = w_glu.clone();
        let mut state = GluState::new(w_glu.clone());
        for g in &grads {
            let mut g = g.clone();
            g.resize(dim, 0.0);
            let g = DenseVec::from_vec(g).unwrap();
            glu_local_update(&mut w_glu, &g, &mut state, &hp).unwrap();
            local_sgd_update(&mut w_sgd, &g, &hp).unwrap();
            prop_assert!(w_glu.bits_eq(&w_sgd));
        }
    }

    /// Momentum off and no decay reduces the server update to textbook SGD.
    #[test]
    fn server_update_reduces_to_sgd(
        w0 in prop::collection::vec(-10.0f64..10.0, 1..8),
        g in prop::collection::vec(-5.0f64..5.0, 1..8),
        lr in 0.001f64..1.0,
    ) {
        let dim = w0.len().min(g.len());
        let hp = HyperParams { lr, momentum: 0.0, wd: 0.0, ..HyperParams::default() };
        let mut w = DenseVec::from_vec(w0[..dim].to_vec()).unwrap();
        let grad = DenseVec::from_vec(g[..dim].to_vec()).unwrap();
        let mut expect = w.clone();
        let mut state = ServerOptState::new(dim);
        server_momentum_update(&mut w, &grad, &mut state, &hp).unwrap();
        expect.add_scaled(-lr, &grad);
        prop_assert!(w.bits_eq(&expect));
    }

    /// The layer map partitions the parameter vector for every model shape.
    #[test]
    fn layer_spec_partitions(params_dim in 1usize..40, hidden in 1usize..12) {
        for kind in [ModelKind::LinearRegression, ModelKind::LogisticRegression, ModelKind::Mlp2] {
            let model = Model::new(kind, params_dim, hidden);
            let mut expected = 0;
            for layer in model.layer_spec() {
                prop_assert_eq!(layer.offset, expected);
                prop_assert!(layer.len > 0);
                expected += layer.len;
            }
            prop_assert_eq!(expected, model.param_len());
        }
    }

    /// Averaged iteration time never increases with k in the modeled
    /// regimes, and the classifier is total.
    #[test]
    fn avg_time_monotone_and_classifier_total(seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for profile in [sample::case1(&mut rng), sample::case2(&mut rng), sample::compute_bound(&mut rng)] {
            let decision = classify(&profile);
            match decision.case {
                PipelineCase::Case2 => prop_assert!(decision.send_total >= decision.compute_window),
                PipelineCase::Case1 => prop_assert!(decision.pull_slack > 0.0),
                PipelineCase::Case3 => prop_assert!(decision.pull_slack <= 0.0),
            }
            if decision.case != PipelineCase::Case3 {
                let mut last = f64::INFINITY;
                for k in 1..=8 {
                    let (avg, _) = ssd_avg_iter_time(&profile, k);
                    prop_assert!(avg <= last + 1e-12);
                    last = avg;
                }
            } else {
                let (a1, _) = ssd_avg_iter_time(&profile, 1);
                let (a7, _) = ssd_avg_iter_time(&profile, 7);
                prop_assert_eq!(a1, a7);
            }
        }
    }
}
