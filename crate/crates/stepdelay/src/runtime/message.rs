//! Protocol messages and the message log.

/// Worker id reserved for monitoring clients: their pulls are answered
/// immediately with the latest committed weight and bypass the barrier.
pub const MONITOR_ID: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Push,
    PushAck,
    PullReq,
    PullResp,
}

impl MessageKind {
    pub fn code(self) -> u8 {
        match self {
            MessageKind::Push => 0,
            MessageKind::PushAck => 1,
            MessageKind::PullReq => 2,
            MessageKind::PullResp => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<MessageKind> {
        match code {
            0 => Some(MessageKind::Push),
            1 => Some(MessageKind::PushAck),
            2 => Some(MessageKind::PullReq),
            3 => Some(MessageKind::PullResp),
            _ => None,
        }
    }
}

/// One protocol message. `payload` carries gradients for `Push` and weights
/// for `PullResp`; it is empty for `PushAck` and `PullReq`.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub key: u32,
    pub worker_id: u16,
    pub iteration: u64,
    pub payload: Vec<f64>,
}

impl Message {
    pub fn push(key: u32, worker_id: u16, iteration: u64, payload: Vec<f64>) -> Self {
        Message {
            kind: MessageKind::Push,
            key,
            worker_id,
            iteration,
            payload,
        }
    }

    pub fn pull_req(key: u32, worker_id: u16, iteration: u64) -> Self {
        Message {
            kind: MessageKind::PullReq,
            key,
            worker_id,
            iteration,
            payload: Vec::new(),
        }
    }
}

/// Append-only record of delivered messages, used to verify communication
/// cadence (push every iteration, pull once per k).
#[derive(Debug, Default, Clone)]
pub struct MessageLog {
    entries: Vec<LogEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEntry {
    pub kind: MessageKind,
    pub worker_id: u16,
    pub iteration: u64,
    pub key: u32,
}

impl MessageLog {
    pub fn record(&mut self, msg: &Message) {
        self.entries.push(LogEntry {
            kind: msg.kind,
            worker_id: msg.worker_id,
            iteration: msg.iteration,
            key: msg.key,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    /// Distinct iterations >= `from_iteration` in which `worker` sent at
    /// least one message of `kind`. A multi-key push or pull counts once.
    pub fn rounds(&self, kind: MessageKind, worker: u16, from_iteration: u64) -> u64 {
        let mut iters: Vec<u64> = self
            .entries
            .iter()
            .filter(|e| e.kind == kind && e.worker_id == worker && e.iteration >= from_iteration)
            .map(|e| e.iteration)
            .collect();
        iters.sort_unstable();
        iters.dedup();
        iters.len() as u64
    }

    pub fn push_rounds(&self, worker: u16, from_iteration: u64) -> u64 {
        self.rounds(MessageKind::Push, worker, from_iteration)
    }

    pub fn pull_rounds(&self, worker: u16, from_iteration: u64) -> u64 {
        self.rounds(MessageKind::PullReq, worker, from_iteration)
    }

    /// Total raw message count of one kind.
    pub fn count(&self, kind: MessageKind) -> u64 {
        self.entries.iter().filter(|e| e.kind == kind).count() as u64
    }
}
