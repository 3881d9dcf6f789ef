//! Loopback TCP transport speaking the binary wire format.
//!
//! The server process owns every shard behind one listener; each worker
//! connection gets a reader thread (frames in, shared-state dispatch) and a
//! writer channel (replies out, including pull responses deferred across
//! connections). Workers run the same loop as the in-process transports, so
//! trajectories are bit-exact across transports.

use super::message::{Message, MessageKind};
use super::shard::ParamShard;
use super::threaded::PsClient;
use super::wire;
use crate::error::{Result, RuntimeError};
use crate::optim::HyperParams;
use std::collections::HashMap;
use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

struct ServerState {
    shards: Vec<ParamShard>,
    hp: HyperParams,
    /// worker id -> writer channel of its connection
    writers: HashMap<u16, Sender<Message>>,
}

/// Shard server listening on a loopback address.
pub struct SocketServer {
    addr: SocketAddr,
    state: Arc<Mutex<ServerState>>,
    stop: Arc<AtomicBool>,
    accept_handle: Option<JoinHandle<()>>,
}

impl SocketServer {
    pub fn spawn(shards: Vec<ParamShard>, hp: HyperParams) -> Result<SocketServer> {
        let listener = TcpListener::bind(("127.0.0.1", 0))?;
        let addr = listener.local_addr()?;
        let state = Arc::new(Mutex::new(ServerState {
            shards,
            hp,
            writers: HashMap::new(),
        }));
        let stop = Arc::new(AtomicBool::new(false));
        let accept_state = Arc::clone(&state);
        let accept_stop = Arc::clone(&stop);
        let accept_handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if accept_stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { break };
                let state = Arc::clone(&accept_state);
                std::thread::spawn(move || {
                    let _ = serve_connection(stream, state);
                });
            }
        });
        Ok(SocketServer {
            addr,
            state,
            stop,
            accept_handle: Some(accept_handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting and returns the shards.
    pub fn shutdown(mut self) -> Result<Vec<ParamShard>> {
        self.stop.store(true, Ordering::SeqCst);
        // unblock the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept_handle.take() {
            let _ = h.join();
        }
        let mut state = self
            .state
            .lock()
            .map_err(|_| RuntimeError::Protocol("server state poisoned".into()))?;
        state.writers.clear();
        let mut shards = std::mem::take(&mut state.shards);
        shards.sort_by_key(|s| s.key);
        Ok(shards)
    }
}

fn serve_connection(stream: TcpStream, state: Arc<Mutex<ServerState>>) -> Result<()> {
    stream.set_nodelay(true).ok();
    let write_half = stream.try_clone()?;
    let (tx, rx) = channel::<Message>();
    // writer thread: serialize replies for this connection
    let writer = std::thread::spawn(move || {
        let mut write_half = write_half;
        while let Ok(msg) = rx.recv() {
            if wire::write_frame(&mut write_half, &msg).is_err() {
                break;
            }
        }
    });

    let mut reader = BufReader::new(stream);
    let mut registered: Option<u16> = None;
    while let Some(msg) = wire::read_frame(&mut reader)? {
        let mut st = state
            .lock()
            .map_err(|_| RuntimeError::Protocol("server state poisoned".into()))?;
        // first message from a connection binds its worker id to the writer
        if registered.is_none() {
            st.writers.insert(msg.worker_id, tx.clone());
            registered = Some(msg.worker_id);
        }
        let key = msg.key;
        let hp = st.hp.clone();
        let shard = st
            .shards
            .iter_mut()
            .find(|s| s.key == key)
            .ok_or_else(|| RuntimeError::Protocol(format!("no shard for key {key}")))?;
        let replies = shard.handle(&msg, &hp)?;
        for reply in replies {
            if let Some(writer_tx) = st.writers.get(&reply.worker_id) {
                let _ = writer_tx.send(reply);
            }
        }
    }
    if let Some(id) = registered {
        if let Ok(mut st) = state.lock() {
            st.writers.remove(&id);
        }
    }
    drop(tx);
    let _ = writer.join();
    Ok(())
}

/// Client side of the socket transport.
pub struct SocketClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl SocketClient {
    pub fn connect(addr: SocketAddr) -> Result<SocketClient> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true).ok();
        let writer = stream.try_clone()?;
        Ok(SocketClient {
            reader: BufReader::new(stream),
            writer,
        })
    }

    fn recv_kind(&mut self, kind: MessageKind) -> Result<Message> {
        match wire::read_frame(&mut self.reader)? {
            Some(msg) if msg.kind == kind => Ok(msg),
            Some(msg) => Err(RuntimeError::Protocol(format!(
                "expected {kind:?}, got {:?}",
                msg.kind
            ))),
            None => Err(RuntimeError::Transport("server closed connection".into())),
        }
    }
}

impl PsClient for SocketClient {
    fn push(&mut self, key: u32, worker_id: u16, iteration: u64, payload: Vec<f64>) -> Result<()> {
        wire::write_frame(&mut self.writer, &Message::push(key, worker_id, iteration, payload))?;
        self.recv_kind(MessageKind::PushAck)?;
        Ok(())
    }

    fn pull(&mut self, key: u32, worker_id: u16, iteration: u64) -> Result<Vec<f64>> {
        wire::write_frame(&mut self.writer, &Message::pull_req(key, worker_id, iteration))?;
        let resp = self.recv_kind(MessageKind::PullResp)?;
        Ok(resp.payload)
    }
}
