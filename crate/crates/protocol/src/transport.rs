//! Message transports between the server and clients.
//!
//! Frames are whole encoded messages; the wire header already carries the
//! payload length, so stream transports add no framing bytes of their own.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;

use crate::wire::{decode_header, HEADER_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Server,
    Client(u64),
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Server => write!(f, "server"),
            Endpoint::Client(id) => write!(f, "client {id}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("no message for {0} before the deadline")]
    Timeout(Endpoint),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(Endpoint),
    #[error("{0} cannot send to {1}")]
    InvalidRoute(Endpoint, Endpoint),
    #[error("connection closed: {0}")]
    Closed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A delivered frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub from: Endpoint,
    pub bytes: Vec<u8>,
}

/// Bytes delivered per directed link `(from, to)`.
pub type LinkCounters = BTreeMap<(Endpoint, Endpoint), u64>;

/// Star topology: clients talk only to the server.
pub trait Transport: Send {
    fn send(&mut self, from: Endpoint, to: Endpoint, frame: Vec<u8>) -> Result<(), TransportError>;

    fn recv(&mut self, at: Endpoint, timeout: Duration) -> Result<Delivery, TransportError>;

    /// Bytes handed to receivers so far, per link.
    fn delivered(&self) -> &LinkCounters;
}

fn check_route(from: Endpoint, to: Endpoint) -> Result<(), TransportError> {
    match (from, to) {
        (Endpoint::Server, Endpoint::Client(_)) | (Endpoint::Client(_), Endpoint::Server) => Ok(()),
        _ => Err(TransportError::InvalidRoute(from, to)),
    }
}

/// In-process FIFO queues. `recv` on an empty queue times out immediately.
#[derive(Debug, Default)]
pub struct MemoryTransport {
    queues: HashMap<Endpoint, VecDeque<Delivery>>,
    delivered: LinkCounters,
}

impl MemoryTransport {
    pub fn new(clients: impl IntoIterator<Item = u64>) -> Self {
        let mut queues = HashMap::new();
        queues.insert(Endpoint::Server, VecDeque::new());
        for id in clients {
            queues.insert(Endpoint::Client(id), VecDeque::new());
        }
        Self { queues, delivered: BTreeMap::new() }
    }
}

impl Transport for MemoryTransport {
    fn send(&mut self, from: Endpoint, to: Endpoint, frame: Vec<u8>) -> Result<(), TransportError> {
        check_route(from, to)?;
        if !self.queues.contains_key(&from) {
            return Err(TransportError::UnknownEndpoint(from));
        }
        let q = self.queues.get_mut(&to).ok_or(TransportError::UnknownEndpoint(to))?;
        q.push_back(Delivery { from, bytes: frame });
        Ok(())
    }

    fn recv(&mut self, at: Endpoint, _timeout: Duration) -> Result<Delivery, TransportError> {
        let q = self.queues.get_mut(&at).ok_or(TransportError::UnknownEndpoint(at))?;
        let d = q.pop_front().ok_or(TransportError::Timeout(at))?;
        *self.delivered.entry((d.from, at)).or_default() += d.bytes.len() as u64;
        Ok(d)
    }

    fn delivered(&self) -> &LinkCounters {
        &self.delivered
    }
}

/// One loopback TCP connection per client. Reader threads reassemble frames
/// from the wire header and hand them to per-endpoint inboxes.
pub struct SocketTransport {
    /// Write halves: client side (for uploads) and server side (for downloads).
    client_streams: HashMap<u64, TcpStream>,
    server_streams: HashMap<u64, TcpStream>,
    inboxes: HashMap<Endpoint, Receiver<Result<Delivery, String>>>,
    readers: Vec<JoinHandle<()>>,
    delivered: LinkCounters,
}

/// Upper bound on an accepted payload, so a corrupt length cannot exhaust memory.
const MAX_FRAME_PAYLOAD: u64 = 1 << 32;

fn read_frame(stream: &mut TcpStream) -> std::io::Result<Option<Vec<u8>>> {
    let mut header = [0u8; HEADER_LEN];
    match stream.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let (_, len) =
        decode_header(&header).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
    if len > MAX_FRAME_PAYLOAD {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut frame = header.to_vec();
    frame.resize(HEADER_LEN + len as usize, 0);
    stream.read_exact(&mut frame[HEADER_LEN..])?;
    Ok(Some(frame))
}

fn spawn_reader(mut stream: TcpStream, from: Endpoint, tx: Sender<Result<Delivery, String>>) -> JoinHandle<()> {
    std::thread::spawn(move || loop {
        match read_frame(&mut stream) {
            Ok(Some(bytes)) => {
                if tx.send(Ok(Delivery { from, bytes })).is_err() {
                    return;
                }
            }
            Ok(None) => return,
            Err(e) => {
                let _ = tx.send(Err(e.to_string()));
                return;
            }
        }
    })
}

impl SocketTransport {
    pub fn connect(clients: impl IntoIterator<Item = u64>) -> Result<Self, TransportError> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let (server_tx, server_rx) = mpsc::channel();
        let mut inboxes = HashMap::new();
        let mut client_streams = HashMap::new();
        let mut server_streams = HashMap::new();
        let mut readers = Vec::new();
        for id in clients {
            let client_side = TcpStream::connect(addr)?;
            let (server_side, _) = listener.accept()?;
            client_side.set_nodelay(true)?;
            server_side.set_nodelay(true)?;

            readers.push(spawn_reader(server_side.try_clone()?, Endpoint::Client(id), server_tx.clone()));
            let (tx, rx) = mpsc::channel();
            readers.push(spawn_reader(client_side.try_clone()?, Endpoint::Server, tx));
            inboxes.insert(Endpoint::Client(id), rx);

            client_streams.insert(id, client_side);
            server_streams.insert(id, server_side);
        }
        inboxes.insert(Endpoint::Server, server_rx);
        Ok(Self { client_streams, server_streams, inboxes, readers, delivered: BTreeMap::new() })
    }
}

impl Transport for SocketTransport {
    fn send(&mut self, from: Endpoint, to: Endpoint, frame: Vec<u8>) -> Result<(), TransportError> {
        check_route(from, to)?;
        let stream = match (from, to) {
            (Endpoint::Client(id), _) => self.client_streams.get_mut(&id),
            (Endpoint::Server, Endpoint::Client(id)) => self.server_streams.get_mut(&id),
            _ => None,
        };
        let endpoint = if from == Endpoint::Server { to } else { from };
        let stream = stream.ok_or(TransportError::UnknownEndpoint(endpoint))?;
        stream.write_all(&frame)?;
        stream.flush()?;
        Ok(())
    }

    fn recv(&mut self, at: Endpoint, timeout: Duration) -> Result<Delivery, TransportError> {
        let rx = self.inboxes.get(&at).ok_or(TransportError::UnknownEndpoint(at))?;
        match rx.recv_timeout(timeout) {
            Ok(Ok(d)) => {
                *self.delivered.entry((d.from, at)).or_default() += d.bytes.len() as u64;
                Ok(d)
            }
            Ok(Err(e)) => Err(TransportError::Closed(e)),
            Err(RecvTimeoutError::Timeout) => Err(TransportError::Timeout(at)),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed(format!("{at} inbox disconnected"))),
        }
    }

    fn delivered(&self) -> &LinkCounters {
        &self.delivered
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        for s in self.client_streams.values().chain(self.server_streams.values()) {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
        for h in self.readers.drain(..) {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{encode_message, Abort, Message};

    fn frame(round: u64, reason: &str) -> Vec<u8> {
        encode_message(&Message::Abort(Abort { round, reason: reason.into() }))
    }

    fn exercise(t: &mut dyn Transport) {
        let big = frame(1, &"x".repeat(3_000_000));
        t.send(Endpoint::Client(1), Endpoint::Server, frame(1, "a")).unwrap();
        t.send(Endpoint::Client(2), Endpoint::Server, big.clone()).unwrap();
        let wait = Duration::from_secs(5);
        let mut got = [t.recv(Endpoint::Server, wait).unwrap(), t.recv(Endpoint::Server, wait).unwrap()];
        got.sort_by_key(|d| d.from);
        assert_eq!(got[0].from, Endpoint::Client(1));
        assert_eq!(got[1].bytes, big);

        t.send(Endpoint::Server, Endpoint::Client(2), frame(2, "b")).unwrap();
        let d = t.recv(Endpoint::Client(2), wait).unwrap();
        assert_eq!(d.from, Endpoint::Server);
        assert!(matches!(t.recv(Endpoint::Client(1), Duration::from_millis(20)), Err(TransportError::Timeout(_))));
        assert!(matches!(
            t.send(Endpoint::Client(1), Endpoint::Client(2), vec![]),
            Err(TransportError::InvalidRoute(..))
        ));

        let c = t.delivered();
        assert_eq!(c[&(Endpoint::Client(1), Endpoint::Server)], frame(1, "a").len() as u64);
        assert_eq!(c[&(Endpoint::Client(2), Endpoint::Server)], big.len() as u64);
        assert_eq!(c[&(Endpoint::Server, Endpoint::Client(2))], frame(2, "b").len() as u64);
    }

    #[test]
    fn memory_transport() {
        exercise(&mut MemoryTransport::new([1, 2]));
    }

    #[test]
    fn socket_transport() {
        exercise(&mut SocketTransport::connect([1, 2]).unwrap());
    }
}
