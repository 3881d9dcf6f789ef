//! Worker-side replica state and step logic.
//!
//! A replica holds two weight vectors. `local_weight` is the update-rule
//! variable: local optimizer steps apply to it, and a pull overwrites it
//! with the retrieved global weight. The model's parameters are the
//! broadcast slot: the weights gradients are computed on. They are
//! re-broadcast from `local_weight` right after each local update and
//! before a pull lands, so the iteration following a pull still computes
//! its gradient on the locally updated weights while its own local update
//! rebases onto the pulled ones. During warm-up both slots track the pulled
//! global weight exactly.

use crate::data::{batch_indices, Dataset};
use crate::error::{Result, RuntimeError};
use crate::model::Model;
use crate::optim::{glu_local_update, local_sgd_update, GluState, HyperParams};
use crate::tensor::DenseVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Ssgd,
    Asgd,
    SsdSgd,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "ssgd" => Some(Strategy::Ssgd),
            "asgd" => Some(Strategy::Asgd),
            "ssd-sgd" | "ssdsgd" => Some(Strategy::SsdSgd),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ssgd => "ssgd",
            Strategy::Asgd => "asgd",
            Strategy::SsdSgd => "ssd-sgd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalOptimizer {
    Sgd,
    Glu,
}

impl LocalOptimizer {
    pub fn parse(s: &str) -> Option<LocalOptimizer> {
        match s {
            "sgd" => Some(LocalOptimizer::Sgd),
            "glu" => Some(LocalOptimizer::Glu),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LocalOptimizer::Sgd => "sgd",
            LocalOptimizer::Glu => "glu",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorkerReplica {
    pub worker_id: u16,
    /// Model whose params are the broadcast (gradient-basis) weights.
    pub model: Model,
    /// The update-rule weight variable.
    pub local_weight: DenseVec,
    pub glu_state: Option<GluState>,
    /// Iteration counter; drives the pull cadence.
    pub num: u64,
    /// Time-sequence bookkeeping (advances with every compute step).
    pub time_step: u64,
    pub strategy: Strategy,
    pub local_optimizer: LocalOptimizer,
    /// Worker-internal device count: the batch is split this many ways and
    /// the sub-gradients averaged.
    pub devices: usize,
}

impl WorkerReplica {
    pub fn new(
        worker_id: u16,
        model: Model,
        strategy: Strategy,
        local_optimizer: LocalOptimizer,
        devices: usize,
    ) -> Self {
        let local_weight = model.params.clone();
        WorkerReplica {
            worker_id,
            model,
            local_weight,
            glu_state: None,
            num: 0,
            time_step: 0,
            strategy,
            local_optimizer,
            devices: devices.max(1),
        }
    }

    /// Gradient of the current broadcast weights on this iteration's batch.
    /// With multiple devices the batch splits evenly and the per-device
    /// gradients are averaged, which only changes floating-point grouping.
    pub fn compute_grad(
        &mut self,
        dataset: &Dataset,
        hp: &HyperParams,
        batch_seed: u64,
    ) -> Result<DenseVec> {
        let indices = batch_indices(
            batch_seed,
            self.worker_id,
            self.num,
            hp.batch_size,
            dataset.len(),
        );
        let grad = if self.devices <= 1 {
            let batch = dataset.minibatch(&indices);
            self.model.backward_grad(&batch)?
        } else {
            if hp.batch_size % self.devices != 0 {
                return Err(RuntimeError::DimensionMismatch(format!(
                    "batch size {} not divisible by {} devices",
                    hp.batch_size, self.devices
                )));
            }
            let chunk = hp.batch_size / self.devices;
            let mut acc = DenseVec::zeros(self.model.param_len());
            for part in indices.chunks(chunk) {
                let batch = dataset.minibatch(part);
                let g = self.model.backward_grad(&batch)?;
                acc.add_scaled(1.0, &g);
            }
            acc.scale(1.0 / self.devices as f64);
            acc
        };
        self.time_step += 1;
        Ok(grad)
    }

    /// Warm-up: the pulled global weight lands in both slots.
    pub fn apply_warmup_pull(&mut self, global: DenseVec) -> Result<()> {
        self.local_weight = global.clone();
        self.model.set_params(global)?;
        self.num += 1;
        Ok(())
    }

    /// Entry into the delay stage: snapshot the last pulled weight as the
    /// first `pre_weight`.
    pub fn begin_delay_stage(&mut self) {
        if self.local_optimizer == LocalOptimizer::Glu && self.glu_state.is_none() {
            self.glu_state = Some(GluState::new(self.local_weight.clone()));
        }
    }

    /// Local update followed by the broadcast of the updated weights.
    pub fn apply_local_update(&mut self, grad: &DenseVec, hp: &HyperParams) -> Result<()> {
        match self.local_optimizer {
            LocalOptimizer::Glu => {
                let state = self
                    .glu_state
                    .as_mut()
                    .ok_or_else(|| RuntimeError::Protocol("GLU state missing".into()))?;
                glu_local_update(&mut self.local_weight, grad, state, hp)?;
            }
            LocalOptimizer::Sgd => {
                local_sgd_update(&mut self.local_weight, grad, hp)?;
            }
        }
        self.model.set_params(self.local_weight.clone())?;
        Ok(())
    }

    /// Whether this iteration ends with a pull.
    pub fn wants_pull(&self, hp: &HyperParams) -> bool {
        self.num % hp.k == hp.k - 1
    }

    /// A delay-stage pull: only the update-rule variable is overwritten;
    /// the broadcast weights keep the local update until the next one.
    pub fn apply_delay_pull(&mut self, global: DenseVec) {
        self.local_weight = global;
    }

    pub fn advance(&mut self) {
        self.num += 1;
    }
}
