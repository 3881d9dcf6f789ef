//! Server-side parameter shards.
//!
//! One shard per layer key. Under the synchronous strategies a shard
//! buffers pushes per iteration and commits exactly one global update per
//! iteration once all workers' gradients arrived, folding them in worker-id
//! order so the aggregate is independent of arrival order. Pulls for an
//! iteration are answered only after that iteration's update committed, so
//! no reply ever observes partially aggregated state.

use super::message::{Message, MessageKind, MONITOR_ID};
use crate::error::{Result, RuntimeError};
use crate::optim::{server_momentum_update, HyperParams, ServerOptState};
use crate::tensor::DenseVec;
use std::collections::BTreeMap;

/// How the shard reacts to pushes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerMode {
    /// Barrier aggregation: one update per iteration from K pushes.
    Synchronous,
    /// Every push applies immediately; pulls return the latest weight.
    /// `momentum` keeps the same server optimizer as the synchronous modes
    /// for comparability; disabling it degrades to plain SGD per push.
    Asynchronous { momentum: bool },
}

#[derive(Debug, Clone)]
pub struct ParamShard {
    pub key: u32,
    pub weight: DenseVec,
    pub opt_state: ServerOptState,
    mode: ServerMode,
    workers: u16,
    /// Per-iteration push buffers, folded on the K-th arrival.
    pending: BTreeMap<u64, Vec<Option<Vec<f64>>>>,
    /// Pulls waiting for their iteration's update to commit.
    deferred_pulls: Vec<(u16, u64)>,
    /// Number of committed global updates (the weight's version).
    committed: u64,
}

impl ParamShard {
    pub fn new(key: u32, weight: DenseVec, workers: u16, mode: ServerMode) -> Self {
        let len = weight.len();
        ParamShard {
            key,
            weight,
            opt_state: ServerOptState::new(len),
            mode,
            workers,
            pending: BTreeMap::new(),
            deferred_pulls: Vec::new(),
            committed: 0,
        }
    }

    pub fn committed(&self) -> u64 {
        self.committed
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty() || !self.deferred_pulls.is_empty()
    }

    fn pull_resp(&self, worker: u16, iteration: u64) -> Message {
        Message {
            kind: MessageKind::PullResp,
            key: self.key,
            worker_id: worker,
            iteration,
            payload: self.weight.as_slice().to_vec(),
        }
    }

    fn commit_ready(&mut self, hp: &HyperParams, replies: &mut Vec<Message>) -> Result<()> {
        loop {
            let complete = match self.pending.get(&self.committed) {
                Some(slots) => slots.iter().all(|s| s.is_some()),
                None => false,
            };
            if !complete {
                break;
            }
            let slots = self.pending.remove(&self.committed).expect("checked above");
            // fold in worker-id order, then normalize once
            let mut grad_avg = DenseVec::zeros(self.weight.len());
            {
                let acc = grad_avg.as_mut_slice();
                for slot in &slots {
                    let g = slot.as_ref().expect("complete");
                    for (a, v) in acc.iter_mut().zip(g.iter()) {
                        *a += v;
                    }
                }
            }
            grad_avg.scale(1.0 / self.workers as f64);
            server_momentum_update(&mut self.weight, &grad_avg, &mut self.opt_state, hp)?;
            self.committed += 1;
            // answer pulls that were waiting on this commit
            let ready: Vec<(u16, u64)> = {
                let committed = self.committed;
                let (serve, keep): (Vec<_>, Vec<_>) = self
                    .deferred_pulls
                    .drain(..)
                    .partition(|(_, iter)| *iter < committed);
                self.deferred_pulls = keep;
                serve
            };
            for (worker, iteration) in ready {
                replies.push(self.pull_resp(worker, iteration));
            }
        }
        Ok(())
    }

    /// Handles one message, returning any replies (acks, pull responses,
    /// and previously deferred pull responses unblocked by a commit).
    pub fn handle(&mut self, msg: &Message, hp: &HyperParams) -> Result<Vec<Message>> {
        let mut replies = Vec::new();
        match msg.kind {
            MessageKind::Push => {
                if msg.payload.len() != self.weight.len() {
                    return Err(RuntimeError::DimensionMismatch(format!(
                        "push payload {} != shard {} len {}",
                        msg.payload.len(),
                        self.key,
                        self.weight.len()
                    )));
                }
                match self.mode {
                    ServerMode::Synchronous => {
                        if msg.iteration < self.committed {
                            return Err(RuntimeError::Protocol(format!(
                                "push for already-committed iteration {} (committed {})",
                                msg.iteration, self.committed
                            )));
                        }
                        if msg.worker_id as usize >= self.workers as usize {
                            return Err(RuntimeError::Protocol(format!(
                                "push from unknown worker {}",
                                msg.worker_id
                            )));
                        }
                        let workers = self.workers as usize;
                        let slots = self
                            .pending
                            .entry(msg.iteration)
                            .or_insert_with(|| vec![None; workers]);
                        let slot = &mut slots[msg.worker_id as usize];
                        if slot.is_some() {
                            return Err(RuntimeError::Protocol(format!(
                                "duplicate push from worker {} for iteration {}",
                                msg.worker_id, msg.iteration
                            )));
                        }
                        *slot = Some(msg.payload.clone());
                        self.commit_ready(hp, &mut replies)?;
                    }
                    ServerMode::Asynchronous { momentum } => {
                        let grad = DenseVec::from_vec(msg.payload.clone())?;
                        if momentum {
                            server_momentum_update(
                                &mut self.weight,
                                &grad,
                                &mut self.opt_state,
                                hp,
                            )?;
                        } else {
                            self.weight.add_scaled(-hp.lr, &grad);
                        }
                        self.committed += 1;
                    }
                }
                replies.push(Message {
                    kind: MessageKind::PushAck,
                    key: self.key,
                    worker_id: msg.worker_id,
                    iteration: msg.iteration,
                    payload: Vec::new(),
                });
            }
            MessageKind::PullReq => {
                let immediate = match self.mode {
                    ServerMode::Asynchronous { .. } => true,
                    ServerMode::Synchronous => {
                        msg.worker_id == MONITOR_ID || msg.iteration < self.committed
                    }
                };
                if immediate {
                    replies.push(self.pull_resp(msg.worker_id, msg.iteration));
                } else {
                    self.deferred_pulls.push((msg.worker_id, msg.iteration));
                }
            }
            MessageKind::PushAck | MessageKind::PullResp => {
                return Err(RuntimeError::Protocol(format!(
                    "shard received reply kind {:?}",
                    msg.kind
                )));
            }
        }
        Ok(replies)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp() -> HyperParams {
        HyperParams {
            lr: 0.1,
            momentum: 0.0,
            wd: 0.0,
            workers: 4,
            ..HyperParams::default()
        }
    }

    fn shard(workers: u16) -> ParamShard {
        ParamShard::new(
            0,
            DenseVec::from_vec(vec![1.0, 2.0]).unwrap(),
            workers,
            ServerMode::Synchronous,
        )
    }

    fn push_msg(worker: u16, iter: u64, payload: Vec<f64>) -> Message {
        Message::push(0, worker, iter, payload)
    }

    #[test]
    fn single_worker_commits_every_push() {
        let hp = HyperParams {
            workers: 1,
            ..hp()
        };
        let mut s = shard(1);
        s.handle(&push_msg(0, 0, vec![1.0, 1.0]), &hp).unwrap();
        assert_eq!(s.committed(), 1);
        assert_eq!(s.weight.as_slice(), &[0.9, 1.9]);
    }

    #[test]
    fn aggregation_is_arrival_order_independent() {
        let hp = hp();
        let grads: Vec<Vec<f64>> = vec![
            vec![0.1, -0.7],
            vec![0.03, 0.4],
            vec![-0.55, 0.21],
            vec![0.9, -0.02],
        ];
        let orders: Vec<Vec<u16>> = vec![
            vec![0, 1, 2, 3],
            vec![3, 2, 1, 0],
            vec![2, 0, 3, 1],
            vec![1, 3, 0, 2],
        ];
        let mut results = Vec::new();
        for order in orders {
            let mut s = shard(4);
            for w in order {
                s.handle(&push_msg(w, 0, grads[w as usize].clone()), &hp)
                    .unwrap();
            }
            assert_eq!(s.committed(), 1);
            results.push(s.weight.clone());
        }
        for r in &results[1..] {
            assert!(r.bits_eq(&results[0]));
        }
    }

    #[test]
    fn pull_mid_aggregation_is_deferred_until_commit() {
        let hp = hp();
        let mut s = shard(4);
        s.handle(&push_msg(0, 0, vec![1.0, 0.0]), &hp).unwrap();
        s.handle(&push_msg(1, 0, vec![1.0, 0.0]), &hp).unwrap();
        let replies = s.handle(&Message::pull_req(0, 2, 0), &hp).unwrap();
        assert!(replies.is_empty(), "pull must wait for the barrier");
        s.handle(&push_msg(2, 0, vec![1.0, 0.0]), &hp).unwrap();
        let replies = s.handle(&push_msg(3, 0, vec![1.0, 0.0]), &hp).unwrap();
        let resp = replies
            .iter()
            .find(|m| m.kind == MessageKind::PullResp)
            .expect("deferred pull answered on commit");
        assert_eq!(resp.worker_id, 2);
        assert_eq!(resp.payload, s.weight.as_slice().to_vec());
    }

    #[test]
    fn duplicate_push_is_protocol_error() {
        let hp = hp();
        let mut s = shard(4);
        s.handle(&push_msg(1, 0, vec![1.0, 0.0]), &hp).unwrap();
        let err = s.handle(&push_msg(1, 0, vec![1.0, 0.0]), &hp);
        assert!(matches!(err, Err(RuntimeError::Protocol(_))));
    }

    #[test]
    fn monitor_pull_bypasses_barrier() {
        let hp = hp();
        let mut s = shard(4);
        s.handle(&push_msg(0, 0, vec![1.0, 0.0]), &hp).unwrap();
        let replies = s
            .handle(&Message::pull_req(0, MONITOR_ID, 0), &hp)
            .unwrap();
        assert_eq!(replies.len(), 1);
        assert_eq!(replies[0].payload, vec![1.0, 2.0]);
    }

    #[test]
    fn async_mode_applies_immediately() {
        let hp = HyperParams {
            lr: 0.5,
            momentum: 0.0,
            ..hp()
        };
        let mut s = ParamShard::new(
            0,
            DenseVec::from_vec(vec![0.0]).unwrap(),
            4,
            ServerMode::Asynchronous { momentum: false },
        );
        s.handle(&push_msg(2, 0, vec![1.0]), &hp).unwrap();
        assert_eq!(s.weight.as_slice(), &[-0.5]);
        let replies = s.handle(&Message::pull_req(0, 1, 99), &hp).unwrap();
        assert_eq!(replies[0].payload, vec![-0.5]);
    }

    #[test]
    fn wrong_length_push_rejected() {
        let hp = hp();
        let mut s = shard(4);
        assert!(matches!(
            s.handle(&push_msg(0, 0, vec![1.0]), &hp),
            Err(RuntimeError::DimensionMismatch(_))
        ));
    }
}
