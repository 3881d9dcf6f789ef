//! Binary wire format for the socket transport.
//!
//! Length-prefixed records, all integers little-endian:
//!
//! ```text
//! [record len: u32]                 (length of everything after this field)
//! [kind: u8] [key: u32] [worker_id: u16] [iteration: u64]
//! [payload len: u32]                (number of f64 elements)
//! [payload: f64 x payload len]      (little-endian bit patterns)
//! ```
//!
//! Floats round-trip bit-exactly, so trajectories are identical across
//! transports.

use super::message::{Message, MessageKind};
use crate::error::{Result, RuntimeError};
use std::io::{Read, Write};

const HEADER_LEN: usize = 1 + 4 + 2 + 8 + 4;
/// Refuse absurd frames instead of allocating unbounded buffers.
const MAX_PAYLOAD: u32 = 1 << 26;

pub fn encode(msg: &Message) -> Vec<u8> {
    let record_len = HEADER_LEN + 8 * msg.payload.len();
    let mut out = Vec::with_capacity(4 + record_len);
    out.extend_from_slice(&(record_len as u32).to_le_bytes());
    out.push(msg.kind.code());
    out.extend_from_slice(&msg.key.to_le_bytes());
    out.extend_from_slice(&msg.worker_id.to_le_bytes());
    out.extend_from_slice(&msg.iteration.to_le_bytes());
    out.extend_from_slice(&(msg.payload.len() as u32).to_le_bytes());
    for v in &msg.payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(buf: &[u8]) -> Result<Message> {
    if buf.len() < HEADER_LEN {
        return Err(RuntimeError::Transport(format!(
            "short frame: {} bytes",
            buf.len()
        )));
    }
    let kind = MessageKind::from_code(buf[0])
        .ok_or_else(|| RuntimeError::Transport(format!("unknown message kind {}", buf[0])))?;
    let key = u32::from_le_bytes(buf[1..5].try_into().unwrap());
    let worker_id = u16::from_le_bytes(buf[5..7].try_into().unwrap());
    let iteration = u64::from_le_bytes(buf[7..15].try_into().unwrap());
    let payload_len = u32::from_le_bytes(buf[15..19].try_into().unwrap());
    if payload_len > MAX_PAYLOAD {
        return Err(RuntimeError::Transport(format!(
            "payload of {payload_len} elements exceeds limit"
        )));
    }
    let expected = HEADER_LEN + 8 * payload_len as usize;
    if buf.len() != expected {
        return Err(RuntimeError::Transport(format!(
            "frame length {} != declared {expected}",
            buf.len()
        )));
    }
    let mut payload = Vec::with_capacity(payload_len as usize);
    let mut off = HEADER_LEN;
    for _ in 0..payload_len {
        payload.push(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()));
        off += 8;
    }
    Ok(Message {
        kind,
        key,
        worker_id,
        iteration,
        payload,
    })
}

/// Writes one framed message.
pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    let bytes = encode(msg);
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads one framed message; `Ok(None)` on clean EOF at a frame boundary.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len_buf) as usize;
    if len < HEADER_LEN || len > 4 + HEADER_LEN + 8 * MAX_PAYLOAD as usize {
        return Err(RuntimeError::Transport(format!("bad frame length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    decode(&buf).map(Some)
}
