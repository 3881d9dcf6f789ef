//! Parameter-update rules.
//!
//! The server applies momentum SGD to the mean of the workers' pushed
//! gradients. Between pulls, workers keep their replica moving with either a
//! plain local SGD step or the GLU rule, which adds an inferred global
//! gradient (`grad_sync`) recovered from the displacement between two pulled
//! weight snapshots.
//!
//! All updates are written as descent (weights move against the gradient):
//! the momentum recurrence
//!   mom <- m * mom - lr * (grad + wd * w);  w <- w + mom
//! is the one internally consistent signed chain, and `grad_sync` derived
//! from it carries the raw-gradient sign, so GLU subtracts its contribution
//! as well.

use crate::error::{ConfigError, Result, RuntimeError};
use crate::tensor::DenseVec;

/// Every tunable of the training strategies in one validated record.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Global learning rate applied in the parameter servers.
    pub lr: f64,
    /// Local learning rate applied in the workers.
    pub loc_lr: f64,
    /// Local-gradient coefficient in the GLU rule.
    pub alpha: f64,
    /// Global-gradient (grad_sync) coefficient in the GLU rule.
    pub beta: f64,
    /// Weight decay, applied server-side and inside GLU.
    pub wd: f64,
    /// Momentum coefficient of the server optimizer.
    pub momentum: f64,
    /// Delay steps: pulls happen once every `k` iterations.
    pub k: u64,
    /// Warm-up iterations run as plain synchronous SGD.
    pub wp: u64,
    /// Per-worker batch size.
    pub batch_size: usize,
    /// Worker count.
    pub workers: u16,
}

impl Default for HyperParams {
    fn default() -> Self {
        // alpha/beta/loc_lr ratios follow the grid-searched GLU setting;
        // momentum defaults to the conventional 0.9.
        HyperParams {
            lr: 0.1,
            loc_lr: 0.4,
            alpha: 2.0,
            beta: 0.5,
            wd: 0.0,
            momentum: 0.9,
            k: 1,
            wp: 0,
            batch_size: 32,
            workers: 1,
        }
    }
}

impl HyperParams {
    /// Checks every invariant, naming the failing field.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(ConfigError::field("lr", "must be finite and > 0"));
        }
        if !(self.loc_lr >= 0.0) || !self.loc_lr.is_finite() {
            return Err(ConfigError::field("loc_lr", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(ConfigError::field("momentum", "must satisfy 0 <= m < 1"));
        }
        if self.k < 1 {
            return Err(ConfigError::field("k", "delay steps must be >= 1"));
        }
        if (1 + self.wp) % self.k != 0 {
            return Err(ConfigError::field(
                "wp",
                format!(
                    "(1 + wp) must be divisible by k: (1 + {}) % {} != 0",
                    self.wp, self.k
                ),
            ));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("wd", self.wd)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::field(name, "must be finite and >= 0"));
            }
        }
        if self.batch_size == 0 {
            return Err(ConfigError::field("batch_size", "must be >= 1"));
        }
        if self.workers == 0 {
            return Err(ConfigError::field("workers", "must be >= 1"));
        }
        Ok(())
    }
}

/// Server-side optimizer state: one momentum buffer per shard.
#[derive(Debug, Clone)]
pub struct ServerOptState {
    pub momentum: DenseVec,
}

impl ServerOptState {
    pub fn new(len: usize) -> Self {
        ServerOptState {
            momentum: DenseVec::zeros(len),
        }
    }
}

/// Applies one global momentum-SGD step in place:
/// mom <- m * mom - lr * (grad_avg + wd * w); w <- w + mom.
///
/// `grad_avg` must already be the mean over the workers' pushed gradients.
pub fn server_momentum_update(
    w: &mut DenseVec,
    grad_avg: &DenseVec,
    state: &mut ServerOptState,
    hp: &HyperParams,
) -> Result<()> {
    if w.len() != grad_avg.len() || w.len() != state.momentum.len() {
        return Err(RuntimeError::DimensionMismatch(format!(
            "server update: w {} grad {} mom {}",
            w.len(),
            grad_avg.len(),
            state.momentum.len()
        )));
    }
    let (m, lr, wd) = (hp.momentum, hp.lr, hp.wd);
    let ws = w.as_mut_slice();
    let gs = grad_avg.as_slice();
    let ms = state.momentum.as_mut_slice();
    for i in 0..ws.len() {
        ms[i] = m * ms[i] - lr * (gs[i] + wd * ws[i]);
        ws[i] += ms[i];
    }
    Ok(())
}

/// Worker-side state for the GLU rule.
#[derive(Debug, Clone)]
pub struct GluState {
    /// Backup of the global weight pulled from the servers last time.
    pub pre_weight: DenseVec,
    /// Number of local update operations performed so far.
    pub loc_update: u64,
}

impl GluState {
    /// The first local update initializes `pre_weight` from the replica's
    /// current weight (the one pulled at the end of warm-up).
    pub fn new(initial_weight: DenseVec) -> Self {
        GluState {
            pre_weight: initial_weight,
            loc_update: 0,
        }
    }
}

/// Recovers the approximate global gradient from the displacement between
/// the backed-up pull and the current weight:
/// (pre_weight - w_current) * (1 - m) / (lr * k).
pub fn glu_grad_sync(w_current: &DenseVec, state: &GluState, hp: &HyperParams) -> DenseVec {
    debug_assert_eq!(w_current.len(), state.pre_weight.len());
    let scale = (1.0 - hp.momentum) / (hp.lr * hp.k as f64);
    let mut out = state.pre_weight.clone();
    out.add_scaled(-1.0, w_current);
    out.scale(scale);
    out
}

/// One GLU local update in place:
/// 1. grad_sync from the current `pre_weight`,
/// 2. refresh `pre_weight` when `loc_update > 0 && loc_update % k == 0`
///    (after grad_sync, before the weight step),
/// 3. w <- w - loc_lr * (alpha * grad_local + wd * w + beta * grad_sync),
/// 4. bump the counter.
pub fn glu_local_update(
    w_local: &mut DenseVec,
    grad_local: &DenseVec,
    state: &mut GluState,
    hp: &HyperParams,
) -> Result<()> {
    if w_local.len() != grad_local.len() || w_local.len() != state.pre_weight.len() {
        return Err(RuntimeError::DimensionMismatch(format!(
            "glu update: w {} grad {} pre {}",
            w_local.len(),
            grad_local.len(),
            state.pre_weight.len()
        )));
    }
    let g_sync = glu_grad_sync(w_local, state, hp);
    if state.loc_update > 0 && state.loc_update % hp.k == 0 {
        state.pre_weight = w_local.clone();
    }
    let (a, b, wd, loc_lr) = (hp.alpha, hp.beta, hp.wd, hp.loc_lr);
    let ws = w_local.as_mut_slice();
    let gs = grad_local.as_slice();
    let ss = g_sync.as_slice();
    for i in 0..ws.len() {
        ws[i] -= loc_lr * (a * gs[i] + wd * ws[i] + b * ss[i]);
    }
    state.loc_update += 1;
    Ok(())
}

/// Plain local SGD step: w <- w - loc_lr * grad. Stateless.
pub fn local_sgd_update(
    w_local: &mut DenseVec,
    grad_local: &DenseVec,
    hp: &HyperParams,
) -> Result<()> {
    if w_local.len() != grad_local.len() {
        return Err(RuntimeError::DimensionMismatch(format!(
            "local sgd: w {} grad {}",
            w_local.len(),
            grad_local.len()
        )));
    }
    w_local.add_scaled(-hp.loc_lr, grad_local);
    Ok(())
}
