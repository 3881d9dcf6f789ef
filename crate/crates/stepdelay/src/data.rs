//! Synthetic datasets and deterministic batch sampling.
//!
//! One master seed fans out to dataset, parameter-init, and scheduler
//! streams through `split_seed`, so changing a single component's seed
//! isolates its effect. Batch index streams are keyed by
//! (seed, worker, iteration) and are therefore identical across training
//! strategies by construction.

use crate::error::{Result, RuntimeError};
use crate::tensor::{DenseMat, DenseVec, Minibatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; the documented seed-splitting rule.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derives the `lane`-th child seed of `master`.
pub fn split_seed(master: u64, lane: u64) -> u64 {
    let mut state = master;
    let mut out = 0;
    for _ in 0..=lane {
        out = splitmix64(&mut state);
    }
    out
}

/// Seed lanes used by the experiment harness.
pub mod lanes {
    pub const DATASET: u64 = 0;
    pub const INIT: u64 = 1;
    pub const SCHEDULER: u64 = 2;
    pub const BATCHES: u64 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// y = w*.x + b* + noise, for the regression model.
    Regression,
    /// 0/1 labels from a hidden separator with optional label flips.
    TwoClass,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Option<DatasetKind> {
        match s {
            "regression" => Some(DatasetKind::Regression),
            "two-class" | "classification" => Some(DatasetKind::TwoClass),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Regression => "regression",
            DatasetKind::TwoClass => "two-class",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub features: DenseMat,
    pub labels: DenseVec,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn minibatch(&self, indices: &[usize]) -> Minibatch {
        let d = self.dim();
        let mut flat = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            flat.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        Minibatch::new(
            DenseMat::from_vec(flat, indices.len(), d).expect("rows are finite"),
            DenseVec::from_vec(labels).expect("labels are finite"),
        )
        .expect("shapes agree by construction")
    }

    /// The whole dataset as one batch, for evaluation.
    pub fn full_batch(&self) -> Minibatch {
        Minibatch::new(self.features.clone(), self.labels.clone()).expect("dataset is consistent")
    }
}

/// Generates a deterministic synthetic dataset.
///
/// For `TwoClass`, labels come from a hidden linear separator; points inside
/// a small margin band are resampled so a noise-free dataset is cleanly
/// separable, then labels are flipped independently at `noise` rate.
pub fn make_synthetic(
    kind: DatasetKind,
    n_samples: usize,
    dim: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_samples == 0 || dim == 0 {
        return Err(RuntimeError::DimensionMismatch(
            "dataset needs n_samples > 0 and dim > 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&noise) || !noise.is_finite() {
        return Err(RuntimeError::NonFinite(format!(
            "noise rate {noise} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sep: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sep_bias: f64 = rng.gen_range(-0.25..0.25);
    let sep_norm = sep.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);

    let mut flat = Vec::with_capacity(n_samples * dim);
    let mut labels = Vec::with_capacity(n_samples);
    let margin = 0.1;
    for _ in 0..n_samples {
        let mut x: Vec<f64>;
        let mut score;
        loop {
            x = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            score = x.iter().zip(sep.iter()).map(|(a, b)| a * b).sum::<f64>() + sep_bias;
            match kind {
                DatasetKind::Regression => break,
                // keep a margin band clear of the separator
                DatasetKind::TwoClass if score.abs() / sep_norm >= margin => break,
                DatasetKind::TwoClass => continue,
            }
        }
        let label = match kind {
            DatasetKind::Regression => score + noise * rng.gen_range(-1.0..1.0),
            DatasetKind::TwoClass => {
                let clean = if score > 0.0 { 1.0 } else { 0.0 };
                if noise > 0.0 && rng.gen_bool(noise) {
                    1.0 - clean
                } else {
                    clean
                }
            }
        };
        flat.extend_from_slice(&x);
        labels.push(label);
    }
    Ok(Dataset {
        kind,
        features: DenseMat::from_vec(flat, n_samples, dim)?,
        labels: DenseVec::from_vec(labels)?,
    })
}

/// Batch indices for (worker, iteration), identical for any strategy.
pub fn batch_indices(
    batch_seed: u64,
    worker_id: u16,
    iteration: u64,
    batch_size: usize,
    n_samples: usize,
) -> Vec<usize> {
    let mut state = batch_seed ^ ((worker_id as u64) << 48) ^ iteration.wrapping_mul(0x9E37);
    let key = splitmix64(&mut state);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    (0..batch_size).map(|_| rng.gen_range(0..n_samples)).collect()
}
