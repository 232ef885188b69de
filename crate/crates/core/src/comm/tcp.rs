//! Full-mesh TCP backend, one OS process per rank.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::mailbox::Mailbox;
use super::wire::{FrameKind, Message, PROTOCOL_VERSION};
use super::{CommError, Communicator, Transport, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, Copy)]
pub struct TcpOptions {
    /// How long to keep dialing / accepting while the mesh forms.
    pub connect_timeout: Duration,
    /// Per-receive timeout used by the resulting communicator.
    pub timeout: Duration,
}

impl Default for TcpOptions {
    fn default() -> Self {
        TcpOptions { connect_timeout: Duration::from_secs(30), timeout: DEFAULT_TIMEOUT }
    }
}

struct Peer {
    writer: Mutex<BufWriter<TcpStream>>,
    stream: TcpStream,
}

pub(crate) struct Tcp {
    rank: usize,
    peers: Vec<Option<Peer>>,
    mailbox: Arc<Mailbox>,
}

impl Transport for Tcp {
    fn send(&self, dst: usize, tag: u32, payload: Vec<u8>) -> Result<(), CommError> {
        if dst == self.rank {
            self.mailbox.push(dst, tag, payload);
            return Ok(());
        }
        let peer = self.peers[dst].as_ref().expect("mesh has every peer");
        let msg = Message {
            kind: FrameKind::Message,
            src: self.rank as u32,
            dst: dst as u32,
            tag,
            payload,
        };
        let mut w = peer.writer.lock().unwrap();
        msg.write_to(&mut *w).map_err(CommError::Io)
    }

    fn recv(&self, src: usize, tag: u32, timeout: Duration) -> Result<Vec<u8>, CommError> {
        self.mailbox.pop(src, tag, timeout)
    }
}

impl Drop for Tcp {
    fn drop(&mut self) {
        // Half-close only: peers may still be draining data we sent.
        for p in self.peers.iter().flatten() {
            let _ = p.writer.lock().map(|mut w| {
                let _ = io::Write::flush(&mut *w);
            });
            let _ = p.stream.shutdown(Shutdown::Write);
        }
    }
}

fn resolve(addr: &str) -> Result<SocketAddr, CommError> {
    addr.to_socket_addrs()
        .map_err(CommError::Io)?
        .next()
        .ok_or_else(|| CommError::Protocol(format!("address {addr} did not resolve")))
}

/// Binds this rank's listen address and joins the mesh.
///
/// `peers[rank]` is this process's own address. A single-entry peer list
/// yields a size-1 communicator without opening any socket.
pub fn connect_tcp(rank: usize, peers: &[String], opts: &TcpOptions) -> Result<Communicator, CommError> {
    if rank >= peers.len() {
        return Err(CommError::InvalidRank { rank, size: peers.len() });
    }
    if peers.len() == 1 {
        return Ok(loopback_only(opts.timeout));
    }
    let own = resolve(&peers[rank])?;
    let listener = TcpListener::bind(own).map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => CommError::AddrInUse { addr: peers[rank].clone() },
        _ => CommError::Io(e),
    })?;
    connect_tcp_with_listener(rank, peers, listener, opts)
}

fn loopback_only(timeout: Duration) -> Communicator {
    let t = Tcp { rank: 0, peers: vec![None], mailbox: Arc::new(Mailbox::default()) };
    Communicator::new(0, 1, Box::new(t), timeout)
}

/// Like [`connect_tcp`] but with an already bound listener for this rank.
///
/// Lower ranks dial higher ranks; each accepted connection must open with a
/// handshake naming this rank and the same group size.
pub fn connect_tcp_with_listener(
    rank: usize,
    peers: &[String],
    listener: TcpListener,
    opts: &TcpOptions,
) -> Result<Communicator, CommError> {
    let size = peers.len();
    if rank >= size {
        return Err(CommError::InvalidRank { rank, size });
    }
    if size == 1 {
        return Ok(loopback_only(opts.timeout));
    }
    let deadline = Instant::now() + opts.connect_timeout;
    let mut streams: Vec<Option<TcpStream>> = (0..size).map(|_| None).collect();

    for (peer, addr) in peers.iter().enumerate().skip(rank + 1) {
        let mut s = dial(addr, deadline)?;
        s.set_nodelay(true).map_err(CommError::Io)?;
        s.set_read_timeout(Some(opts.connect_timeout)).map_err(CommError::Io)?;
        Message::handshake(rank as u32, peer as u32, size as u32)
            .write_to(&mut s)
            .map_err(CommError::Io)?;
        let reply = Message::read_from(&mut s)?
            .ok_or_else(|| CommError::HandshakeMismatch(format!("rank {peer} closed during handshake")))?;
        check_handshake(&reply, peer, rank, size)?;
        s.set_read_timeout(None).map_err(CommError::Io)?;
        streams[peer] = Some(s);
    }

    listener.set_nonblocking(true).map_err(CommError::Io)?;
    let mut pending = rank;
    while pending > 0 {
        match listener.accept() {
            Ok((mut s, _)) => {
                s.set_nonblocking(false).map_err(CommError::Io)?;
                s.set_nodelay(true).map_err(CommError::Io)?;
                s.set_read_timeout(Some(opts.connect_timeout)).map_err(CommError::Io)?;
                let hello = Message::read_from(&mut s)?
                    .ok_or_else(|| CommError::HandshakeMismatch("peer closed before handshake".into()))?;
                let src = hello.src as usize;
                // Always answer so the dialer can diagnose a mismatch too.
                Message::handshake(rank as u32, hello.src, size as u32)
                    .write_to(&mut s)
                    .map_err(CommError::Io)?;
                if src >= rank {
                    return Err(CommError::HandshakeMismatch(format!(
                        "rank {src} dialed rank {rank}; only lower ranks dial"
                    )));
                }
                check_handshake(&hello, src, rank, size)?;
                if streams[src].is_some() {
                    return Err(CommError::HandshakeMismatch(format!("duplicate connection from rank {src}")));
                }
                s.set_read_timeout(None).map_err(CommError::Io)?;
                streams[src] = Some(s);
                pending -= 1;
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(CommError::ConnectTimeout { addr: peers[rank].clone() });
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(CommError::Io(e)),
        }
    }

    let mailbox = Arc::new(Mailbox::default());
    let mut peer_slots = Vec::with_capacity(size);
    for (peer, s) in streams.into_iter().enumerate() {
        let Some(s) = s else {
            peer_slots.push(None);
            continue;
        };
        let reader = s.try_clone().map_err(CommError::Io)?;
        let writer = s.try_clone().map_err(CommError::Io)?;
        let mb = Arc::clone(&mailbox);
        std::thread::Builder::new()
            .name(format!("tcp-reader-{rank}<-{peer}"))
            .spawn(move || read_loop(reader, peer, rank, mb))
            .map_err(CommError::Io)?;
        peer_slots.push(Some(Peer { writer: Mutex::new(BufWriter::new(writer)), stream: s }));
    }
    let t = Tcp { rank, peers: peer_slots, mailbox };
    Ok(Communicator::new(rank, size, Box::new(t), opts.timeout))
}

fn dial(addr: &str, deadline: Instant) -> Result<TcpStream, CommError> {
    let target = resolve(addr)?;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Err(CommError::ConnectTimeout { addr: addr.to_string() });
        }
        match TcpStream::connect_timeout(&target, left.min(Duration::from_secs(1))) {
            Ok(s) => return Ok(s),
            Err(_) => std::thread::sleep(Duration::from_millis(10)),
        }
    }
}

fn check_handshake(m: &Message, expect_src: usize, own: usize, size: usize) -> Result<(), CommError> {
    let (version, n) = m
        .handshake_fields()
        .ok_or_else(|| CommError::HandshakeMismatch("expected a handshake frame".into()))?;
    if version != PROTOCOL_VERSION {
        return Err(CommError::HandshakeMismatch(format!("protocol version {version}, expected {PROTOCOL_VERSION}")));
    }
    if n as usize != size {
        return Err(CommError::HandshakeMismatch(format!("peer group size {n}, local group size {size}")));
    }
    if m.src as usize != expect_src || m.dst as usize != own {
        return Err(CommError::HandshakeMismatch(format!(
            "handshake {}->{}, expected {expect_src}->{own}",
            m.src, m.dst
        )));
    }
    Ok(())
}

fn read_loop(stream: TcpStream, peer: usize, own: usize, mailbox: Arc<Mailbox>) {
    let mut r = BufReader::new(stream);
    loop {
        match Message::read_from(&mut r) {
            Ok(Some(m)) if m.kind == FrameKind::Message && m.src as usize == peer && m.dst as usize == own => {
                mailbox.push(peer, m.tag, m.payload);
            }
            Ok(Some(_)) | Ok(None) | Err(_) => break,
        }
    }
    mailbox.disconnect(peer);
}
