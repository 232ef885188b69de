//! Rank-based message passing.
//!
//! A [`Communicator`] gives one rank point-to-point messaging and a small set
//! of collectives. Two backends exist: threads of one process
//! ([`spawn_inprocess`]) and a TCP full mesh ([`connect_tcp`]). Both are driven
//! by the same collective code, so identical call sequences produce identical
//! bytes on either backend.
//!
//! Collectives are built from point-to-point messages with fixed schedules:
//! a ring for [`Communicator::all_to_all`] and a rank-ascending binomial tree
//! for reductions and broadcasts. Every collective carries a one-byte status
//! so that a rank detecting a usage error can make its peers fail too, instead
//! of leaving them to time out.

mod inprocess;
mod mailbox;
mod tcp;
pub mod wire;

use std::time::Duration;

use thiserror::Error;

pub use inprocess::{spawn_inprocess, spawn_inprocess_with_timeout, GroupFailure, RankFailure};
pub use tcp::{connect_tcp, connect_tcp_with_listener, TcpOptions};
pub use wire::Message;

/// Per-receive timeout used unless configured otherwise.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Tags at or above this value are reserved for collectives.
pub const COLLECTIVE_TAG_BASE: u32 = 0x8000_0000;

#[derive(Debug, Error)]
pub enum CommError {
    #[error("timed out after {after:?} waiting for rank {peer} (tag {tag:#x})")]
    Timeout { peer: usize, tag: u32, after: Duration },
    #[error("group aborted: {reason}")]
    Aborted { reason: String },
    #[error("rank {peer} disconnected")]
    Disconnected { peer: usize },
    #[error("handshake mismatch: {0}")]
    HandshakeMismatch(String),
    #[error("timed out connecting mesh at {addr}")]
    ConnectTimeout { addr: String },
    #[error("address in use: {addr}")]
    AddrInUse { addr: String },
    #[error("rank {rank} out of range for group of size {size}")]
    InvalidRank { rank: usize, size: usize },
    #[error("tag {0:#x} is reserved for collectives")]
    ReservedTag(u32),
    #[error("expected {expected} bytes, received {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("{op}: {detail}")]
    Collective { op: &'static str, detail: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) trait Transport: Send {
    fn send(&self, dst: usize, tag: u32, payload: Vec<u8>) -> Result<(), CommError>;
    fn recv(&self, src: usize, tag: u32, timeout: Duration) -> Result<Vec<u8>, CommError>;
}

/// Running totals of traffic to and from other ranks. Self-messages are not
/// counted; collective status bytes are not counted as payload.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub messages_sent: u64,
    pub messages_received: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

impl Counters {
    pub fn since(&self, earlier: &Counters) -> Counters {
        Counters {
            messages_sent: self.messages_sent - earlier.messages_sent,
            messages_received: self.messages_received - earlier.messages_received,
            bytes_sent: self.bytes_sent - earlier.bytes_sent,
            bytes_received: self.bytes_received - earlier.bytes_received,
        }
    }

    /// Received payload expressed in complex elements (16 bytes each).
    pub fn complex_received(&self) -> u64 {
        self.bytes_received / 16
    }
}

/// Token returned by [`Communicator::isend`]. Sends are buffered eagerly, so
/// waiting never blocks.
#[must_use = "a pending send should be waited on"]
#[derive(Debug)]
pub struct SendRequest {
    _priv: (),
}

impl SendRequest {
    pub fn wait(self) -> Result<(), CommError> {
        Ok(())
    }
}

/// Token returned by [`Communicator::irecv`].
#[must_use = "a pending receive must be waited on"]
#[derive(Debug)]
pub struct RecvRequest {
    src: usize,
    tag: u32,
    expected: Option<usize>,
}

impl RecvRequest {
    /// Makes [`Communicator::wait_recv`] fail unless exactly `len` bytes arrive.
    pub fn expect_len(mut self, len: usize) -> Self {
        self.expected = Some(len);
        self
    }
}

/// One rank's endpoint in a group.
pub struct Communicator {
    rank: usize,
    size: usize,
    transport: Box<dyn Transport>,
    timeout: Duration,
    collective_seq: u32,
    counters: Counters,
}

impl std::fmt::Debug for Communicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Communicator")
            .field("rank", &self.rank)
            .field("size", &self.size)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

const STATUS_OK: u8 = 0;
const STATUS_ERR: u8 = 1;

impl Communicator {
    pub(crate) fn new(rank: usize, size: usize, transport: Box<dyn Transport>, timeout: Duration) -> Self {
        assert!(size >= 1 && rank < size);
        Communicator { rank, size, transport, timeout, collective_seq: 0, counters: Counters::default() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    fn check_rank(&self, r: usize) -> Result<(), CommError> {
        if r < self.size {
            Ok(())
        } else {
            Err(CommError::InvalidRank { rank: r, size: self.size })
        }
    }

    fn raw_send(&mut self, dst: usize, tag: u32, payload: Vec<u8>, counted: usize) -> Result<(), CommError> {
        if dst != self.rank {
            self.counters.messages_sent += 1;
            self.counters.bytes_sent += counted as u64;
        }
        self.transport.send(dst, tag, payload)
    }

    fn raw_recv(&mut self, src: usize, tag: u32) -> Result<Vec<u8>, CommError> {
        self.transport.recv(src, tag, self.timeout)
    }

    fn note_received(&mut self, src: usize, counted: usize) {
        if src != self.rank {
            self.counters.messages_received += 1;
            self.counters.bytes_received += counted as u64;
        }
    }

    // ---- point to point ----------------------------------------------

    /// Posts a send to `dst` (which may be this rank). Messages on the same
    /// `(src, dst, tag)` triple arrive in send order.
    pub fn isend(&mut self, dst: usize, tag: u32, payload: Vec<u8>) -> Result<SendRequest, CommError> {
        self.check_rank(dst)?;
        if tag >= COLLECTIVE_TAG_BASE {
            return Err(CommError::ReservedTag(tag));
        }
        let n = payload.len();
        self.raw_send(dst, tag, payload, n)?;
        Ok(SendRequest { _priv: () })
    }

    pub fn irecv(&mut self, src: usize, tag: u32) -> Result<RecvRequest, CommError> {
        self.check_rank(src)?;
        if tag >= COLLECTIVE_TAG_BASE {
            return Err(CommError::ReservedTag(tag));
        }
        Ok(RecvRequest { src, tag, expected: None })
    }

    pub fn wait_recv(&mut self, req: RecvRequest) -> Result<Vec<u8>, CommError> {
        let msg = self.raw_recv(req.src, req.tag)?;
        self.note_received(req.src, msg.len());
        if let Some(expected) = req.expected {
            if msg.len() != expected {
                return Err(CommError::SizeMismatch { expected, actual: msg.len() });
            }
        }
        Ok(msg)
    }

    pub fn send(&mut self, dst: usize, tag: u32, payload: Vec<u8>) -> Result<(), CommError> {
        self.isend(dst, tag, payload)?.wait()
    }

    pub fn recv(&mut self, src: usize, tag: u32) -> Result<Vec<u8>, CommError> {
        let req = self.irecv(src, tag)?;
        self.wait_recv(req)
    }

    // ---- collective plumbing -----------------------------------------

    fn next_collective_tag(&mut self) -> u32 {
        let tag = COLLECTIVE_TAG_BASE | (self.collective_seq & !COLLECTIVE_TAG_BASE);
        self.collective_seq = self.collective_seq.wrapping_add(1);
        tag
    }

    fn coll_send(&mut self, dst: usize, tag: u32, ok: bool, payload: &[u8]) -> Result<(), CommError> {
        let mut buf = Vec::with_capacity(payload.len() + 1);
        buf.push(if ok { STATUS_OK } else { STATUS_ERR });
        buf.extend_from_slice(payload);
        self.raw_send(dst, tag, buf, payload.len())
    }

    fn coll_recv(&mut self, src: usize, tag: u32) -> Result<(bool, Vec<u8>), CommError> {
        let mut buf = self.raw_recv(src, tag)?;
        if buf.is_empty() {
            return Err(CommError::Protocol("collective message without status byte".into()));
        }
        let ok = buf[0] == STATUS_OK;
        buf.remove(0);
        self.note_received(src, buf.len());
        Ok((ok, buf))
    }

    /// Binomial-tree broadcast of `(ok, payload)` from `root`, in virtual
    /// ranks relative to the root.
    fn tree_broadcast(
        &mut self,
        tag: u32,
        root: usize,
        mut ok: bool,
        mut payload: Vec<u8>,
    ) -> Result<(bool, Vec<u8>), CommError> {
        let n = self.size;
        let vrank = (self.rank + n - root) % n;
        let mut mask = 1usize;
        while mask < n {
            if vrank & mask != 0 {
                let parent = (vrank - mask + root) % n;
                (ok, payload) = self.coll_recv(parent, tag)?;
                break;
            }
            mask <<= 1;
        }
        mask >>= 1;
        while mask > 0 {
            if vrank + mask < n {
                let child = (vrank + mask + root) % n;
                self.coll_send(child, tag, ok, &payload)?;
            }
            mask >>= 1;
        }
        Ok((ok, payload))
    }

    // ---- collectives ---------------------------------------------------

    /// Returns once every rank has entered the barrier.
    pub fn barrier(&mut self) -> Result<(), CommError> {
        self.all_reduce_sum(&[]).map(|_| ())
    }

    /// Sends `payload` from `root` to every rank.
    pub fn broadcast(&mut self, root: usize, payload: Vec<u8>) -> Result<Vec<u8>, CommError> {
        self.check_rank(root)?;
        let tag = self.next_collective_tag();
        let (_, out) = self.tree_broadcast(tag, root, true, payload)?;
        Ok(out)
    }

    /// Element-wise sum of `values` over all ranks, returned on every rank.
    ///
    /// The reduction runs up a binomial tree rooted at rank 0: at stride
    /// `s = 1, 2, 4, ...` rank `i` (with `i % 2s == 0`) adds the partial sum
    /// of rank `i + s` to its own as `own + other`. The result is then
    /// broadcast down the same tree, so for a fixed group size every rank
    /// receives bitwise the same values on every run.
    pub fn all_reduce_sum(&mut self, values: &[f64]) -> Result<Vec<f64>, CommError> {
        let tag = self.next_collective_tag();
        let n = self.size;
        let mut acc: Vec<f64> = values.to_vec();
        let mut ok = true;
        let mut detail = String::new();
        let mut stride = 1usize;
        while stride < n {
            if self.rank % (2 * stride) == 0 {
                let child = self.rank + stride;
                if child < n {
                    let (child_ok, bytes) = self.coll_recv(child, tag)?;
                    let other = decode_f64s(&bytes);
                    if !child_ok || other.len() != acc.len() {
                        if ok && child_ok {
                            detail = format!("length {} from rank {child}, local length {}", other.len(), acc.len());
                        }
                        ok = false;
                    } else {
                        for (a, b) in acc.iter_mut().zip(other) {
                            *a += b;
                        }
                    }
                }
            } else {
                let parent = self.rank - stride;
                self.coll_send(parent, tag, ok, &encode_f64s(&acc))?;
                break;
            }
            stride *= 2;
        }
        let (ok, bytes) = self.tree_broadcast(tag, 0, ok, encode_f64s(&acc))?;
        if !ok {
            if detail.is_empty() {
                detail = "length disagreement across ranks".into();
            }
            return Err(CommError::Collective { op: "all_reduce_sum", detail });
        }
        Ok(decode_f64s(&bytes))
    }

    /// Canonical all-to-all: on rank `i`, `result[j]` is `send_blocks[i]` of
    /// rank `j`.
    ///
    /// Round `r = 1..size` sends to `(i + r) mod size` and receives from
    /// `(i - r) mod size`; the self block is copied locally. All blocks must
    /// share one length on every rank.
    pub fn all_to_all(&mut self, send_blocks: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>, CommError> {
        let n = self.size;
        if send_blocks.len() != n {
            return Err(CommError::Collective {
                op: "all_to_all",
                detail: format!("{} blocks supplied for {n} ranks", send_blocks.len()),
            });
        }
        let tag = self.next_collective_tag();
        let len = send_blocks[0].len();
        let mut ok = send_blocks.iter().all(|b| b.len() == len);
        let mut detail = if ok { String::new() } else { "local blocks differ in length".to_string() };

        let mut recv: Vec<Vec<u8>> = (0..n).map(|_| Vec::new()).collect();
        let mut send_blocks: Vec<Option<Vec<u8>>> = send_blocks.into_iter().map(Some).collect();
        recv[self.rank] = send_blocks[self.rank].take().unwrap();
        for round in 1..n {
            let to = (self.rank + round) % n;
            let from = (self.rank + n - round) % n;
            let block = send_blocks[to].take().unwrap();
            self.coll_send(to, tag, ok, &block)?;
            let (peer_ok, got) = self.coll_recv(from, tag)?;
            if !peer_ok || got.len() != len {
                if ok {
                    detail = format!("block of {} bytes from rank {from}, local block length {len}", got.len());
                }
                ok = false;
            }
            recv[from] = got;
        }
        if !ok {
            return Err(CommError::Collective { op: "all_to_all", detail });
        }
        Ok(recv)
    }

    /// Rank-ordered concatenation of every rank's `local` delivered to `root`
    /// (`None` elsewhere). `counts[i]` must be rank `i`'s length and every
    /// rank must pass the same `counts`; violations fail on all ranks.
    pub fn gather_to(&mut self, root: usize, local: &[u8], counts: &[usize]) -> Result<Option<Vec<u8>>, CommError> {
        self.check_rank(root)?;
        let tag = self.next_collective_tag();
        let n = self.size;
        let local_ok = counts.len() == n && counts[self.rank] == local.len();
        if self.rank != root {
            // Counts travel with the payload so the root can compare views.
            let mut body = encode_counts(counts);
            body.extend_from_slice(local);
            self.coll_send_with_header(root, tag, local_ok, &body, local.len())?;
            let (ok, _) = self.tree_broadcast(tag, root, true, Vec::new())?;
            return if ok {
                Ok(None)
            } else {
                Err(CommError::Collective { op: "gather", detail: "counts disagreement".into() })
            };
        }
        let mut ok = local_ok;
        let mut parts: Vec<Vec<u8>> = Vec::with_capacity(n);
        for src in 0..n {
            if src == root {
                parts.push(local.to_vec());
                continue;
            }
            let (peer_ok, body) = self.coll_recv_with_header(src, tag, counts.len())?;
            let (their_counts, payload) = match split_counts(&body) {
                Some(x) => x,
                None => {
                    ok = false;
                    parts.push(Vec::new());
                    continue;
                }
            };
            if !peer_ok || their_counts != counts || counts.get(src) != Some(&payload.len()) {
                ok = false;
            }
            parts.push(payload.to_vec());
        }
        self.tree_broadcast(tag, root, ok, Vec::new())?;
        if !ok {
            return Err(CommError::Collective { op: "gather", detail: "counts disagreement".into() });
        }
        Ok(Some(parts.concat()))
    }

    /// [`gather_to`](Self::gather_to) rank 0 followed by a broadcast, leaving
    /// the concatenation on every rank.
    pub fn gather_to_all(&mut self, local: &[u8], counts: &[usize]) -> Result<Vec<u8>, CommError> {
        let gathered = self.gather_to(0, local, counts)?;
        self.broadcast(0, gathered.unwrap_or_default())
    }

    /// Sends `blocks[i]` from `root` to rank `i`; returns this rank's block.
    /// Non-root ranks pass `None`. If the root reports failure via
    /// `root_ok = false`, every rank returns an error.
    pub fn scatter_from(&mut self, root: usize, blocks: Option<Vec<Vec<u8>>>) -> Result<Vec<u8>, CommError> {
        self.check_rank(root)?;
        let tag = self.next_collective_tag();
        let n = self.size;
        if self.rank == root {
            let blocks = blocks.filter(|b| b.len() == n);
            let ok = blocks.is_some();
            let mut blocks = blocks.unwrap_or_else(|| vec![Vec::new(); n]);
            for (dst, block) in blocks.iter().enumerate() {
                if dst != root {
                    self.coll_send(dst, tag, ok, block)?;
                }
            }
            if !ok {
                return Err(CommError::Collective { op: "scatter", detail: "root supplied the wrong block count".into() });
            }
            Ok(std::mem::take(&mut blocks[root]))
        } else {
            let (ok, block) = self.coll_recv(root, tag)?;
            if !ok {
                return Err(CommError::Collective { op: "scatter", detail: "root reported failure".into() });
            }
            Ok(block)
        }
    }

    /// Broadcasts a success flag from `root`; used by callers that validate
    /// input on one rank and must fail everywhere.
    pub fn agree(&mut self, root: usize, ok: bool) -> Result<bool, CommError> {
        self.check_rank(root)?;
        let tag = self.next_collective_tag();
        let (ok, _) = self.tree_broadcast(tag, root, ok, Vec::new())?;
        Ok(ok)
    }

    fn coll_send_with_header(
        &mut self,
        dst: usize,
        tag: u32,
        ok: bool,
        body: &[u8],
        counted: usize,
    ) -> Result<(), CommError> {
        let mut buf = Vec::with_capacity(body.len() + 1);
        buf.push(if ok { STATUS_OK } else { STATUS_ERR });
        buf.extend_from_slice(body);
        self.raw_send(dst, tag, buf, counted)
    }

    fn coll_recv_with_header(&mut self, src: usize, tag: u32, _n: usize) -> Result<(bool, Vec<u8>), CommError> {
        let mut buf = self.raw_recv(src, tag)?;
        if buf.is_empty() {
            return Err(CommError::Protocol("collective message without status byte".into()));
        }
        let ok = buf[0] == STATUS_OK;
        buf.remove(0);
        let payload_len = split_counts(&buf).map(|(_, p)| p.len()).unwrap_or(0);
        self.note_received(src, payload_len);
        Ok((ok, buf))
    }
}

fn encode_f64s(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn decode_f64s(b: &[u8]) -> Vec<f64> {
    b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
}

fn encode_counts(counts: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 * counts.len());
    out.extend_from_slice(&(counts.len() as u32).to_le_bytes());
    for &c in counts {
        out.extend_from_slice(&(c as u64).to_le_bytes());
    }
    out
}

fn split_counts(body: &[u8]) -> Option<(Vec<usize>, &[u8])> {
    let n = u32::from_le_bytes(body.get(..4)?.try_into().ok()?) as usize;
    let end = 4 + 8 * n;
    let counts = body
        .get(4..end)?
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    Some((counts, &body[end..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run<R: Send>(n: usize, f: impl Fn(Communicator) -> Result<R, CommError> + Sync) -> Vec<R> {
        spawn_inprocess_with_timeout(n, Duration::from_secs(10), f).unwrap()
    }

    #[test]
    fn spawn_returns_in_rank_order() {
        assert_eq!(run(1, |c| Ok(c.rank())), vec![0]);
        assert_eq!(run(4, |c| Ok(c.rank() * c.rank())), vec![0, 1, 4, 9]);
        assert_eq!(
            run(3, |mut c| {
                c.barrier()?;
                Ok(c.size())
            }),
            vec![3, 3, 3]
        );
    }

    #[test]
    fn failing_rank_aborts_group() {
        let err = spawn_inprocess_with_timeout(3, Duration::from_secs(30), |mut c| {
            if c.rank() == 2 {
                return Err(CommError::Protocol("boom".into()));
            }
            c.barrier()?;
            Ok(())
        })
        .unwrap_err();
        assert_eq!(err.first, 2);
        assert_eq!(err.failures.len(), 3);
        assert!(err.to_string().contains("rank 2"));
    }

    #[test]
    fn panicking_rank_is_reported() {
        let err = spawn_inprocess_with_timeout(2, Duration::from_secs(30), |mut c| {
            if c.rank() == 1 {
                panic!("bad rank");
            }
            c.barrier()
        })
        .unwrap_err();
        assert_eq!(err.first, 1);
        assert!(matches!(err.root_cause(), RankFailure::Panic(m) if m.contains("bad rank")));
    }

    #[test]
    fn loopback_send() {
        let out = run(1, |mut c| {
            let payload: Vec<u8> = (0..16).collect();
            c.isend(0, 3, payload.clone())?.wait()?;
            let req = c.irecv(0, 3)?.expect_len(16);
            Ok(c.wait_recv(req)? == payload)
        });
        assert!(out[0]);
    }

    #[test]
    fn tag_matching_and_fifo() {
        let out = run(2, |mut c| {
            if c.rank() == 0 {
                c.send(1, 7, b"seven".to_vec())?;
                c.send(1, 9, b"nine".to_vec())?;
                c.send(1, 5, b"A".to_vec())?;
                c.send(1, 5, b"B".to_vec())?;
                Ok(vec![])
            } else {
                Ok(vec![c.recv(0, 9)?, c.recv(0, 7)?, c.recv(0, 5)?, c.recv(0, 5)?])
            }
        });
        assert_eq!(out[1], vec![b"nine".to_vec(), b"seven".to_vec(), b"A".to_vec(), b"B".to_vec()]);
    }

    #[test]
    fn expected_length_mismatch() {
        let out = run(1, |mut c| {
            c.send(0, 1, vec![0; 8])?;
            let req = c.irecv(0, 1)?.expect_len(16);
            Ok(matches!(c.wait_recv(req), Err(CommError::SizeMismatch { expected: 16, actual: 8 })))
        });
        assert!(out[0]);
    }

    #[test]
    fn reserved_tags_rejected() {
        let out = run(1, |mut c| Ok(matches!(c.isend(0, COLLECTIVE_TAG_BASE, vec![]), Err(CommError::ReservedTag(_)))));
        assert!(out[0]);
    }

    #[test]
    fn all_to_all_permutation() {
        // Explicit 3x3 block matrix: rank i sends value 10*i + j to rank j.
        let out = run(3, |mut c| {
            let i = c.rank() as u8;
            let blocks = (0..3u8).map(|j| vec![10 * i + j]).collect();
            c.all_to_all(blocks)
        });
        for (j, got) in out.iter().enumerate() {
            let j = j as u8;
            assert_eq!(got, &vec![vec![j], vec![10 + j], vec![20 + j]]);
        }
        assert_eq!(run(1, |mut c| c.all_to_all(vec![b"X".to_vec()])), vec![vec![b"X".to_vec()]]);
        let empty = run(2, |mut c| c.all_to_all(vec![vec![], vec![]]));
        assert!(empty.iter().all(|b| b.iter().all(|x| x.is_empty())));
    }

    #[test]
    fn all_to_all_counts_bytes_and_is_involution() {
        let n = 4;
        let len = 5;
        let out = run(n, |mut c| {
            let r = c.rank();
            let orig: Vec<Vec<u8>> = (0..n).map(|j| vec![(r * 16 + j) as u8; len]).collect();
            let before = c.counters();
            let once = c.all_to_all(orig.clone())?;
            let sent = c.counters().since(&before).bytes_sent;
            let twice = c.all_to_all(once)?;
            Ok((twice == orig, sent))
        });
        let total: u64 = out.iter().map(|(_, s)| s).sum();
        assert!(out.iter().all(|(ok, _)| *ok));
        assert_eq!(total, (n * (n - 1) * len) as u64);
    }

    #[test]
    fn all_to_all_length_disagreement() {
        let out = run(2, |mut c| {
            let len = if c.rank() == 0 { 2 } else { 3 };
            Ok(c.all_to_all(vec![vec![0; len]; 2]).is_err())
        });
        assert_eq!(out, vec![true, true]);
    }

    #[test]
    fn gather_to_all_concatenates_everywhere() {
        let out = run(3, |mut c| {
            let local: &[u8] = [&b"a"[..], b"bb", b"ccc"][c.rank()];
            c.gather_to_all(local, &[1, 2, 3])
        });
        assert!(out.iter().all(|o| o == b"abbccc"));
        assert_eq!(run(1, |mut c| c.gather_to_all(b"xyz", &[3])), vec![b"xyz".to_vec()]);
    }

    #[test]
    fn gather_counts_disagreement_fails_everywhere() {
        let out = run(3, |mut c| {
            let local: &[u8] = [&b"a"[..], b"bb", b"ccc"][c.rank()];
            let counts: &[usize] = if c.rank() == 2 { &[1, 2, 4] } else { &[1, 2, 3] };
            Ok(c.gather_to_all(local, counts).is_err())
        });
        assert_eq!(out, vec![true, true, true]);
    }

    #[test]
    fn all_reduce_examples() {
        assert_eq!(run(1, |mut c| c.all_reduce_sum(&[1.5, 2.5])), vec![vec![1.5, 2.5]]);
        let out = run(4, |mut c| c.all_reduce_sum(&[c.rank() as f64]));
        assert!(out.iter().all(|v| v == &vec![6.0]));
        let out = run(2, |mut c| c.all_reduce_sum(&[if c.rank() == 0 { 1e16 } else { 1.0 }]));
        let expect = 1e16f64 + 1.0;
        assert!(out.iter().all(|v| v[0].to_bits() == expect.to_bits()));
    }

    #[test]
    fn all_reduce_is_reproducible() {
        let vals = |r: usize| -> Vec<f64> { (0..8).map(|i| ((r * 31 + i * 7) as f64).sin() * 10f64.powi(i as i32 % 5)).collect() };
        let a = run(5, |mut c| c.all_reduce_sum(&vals(c.rank())));
        let b = run(5, |mut c| c.all_reduce_sum(&vals(c.rank())));
        for (x, y) in a.iter().zip(&b) {
            assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert!(a.iter().all(|x| x == &a[0]));
    }

    #[test]
    fn all_reduce_length_disagreement() {
        let out = run(3, |mut c| Ok(c.all_reduce_sum(&vec![1.0; 1 + c.rank() % 2]).is_err()));
        assert_eq!(out, vec![true, true, true]);
    }

    #[test]
    fn barrier_timeout_when_rank_absent() {
        let out = spawn_inprocess_with_timeout(2, Duration::from_millis(200), |mut c| {
            if c.rank() == 1 {
                std::thread::sleep(Duration::from_millis(600));
                return Ok::<_, CommError>(None);
            }
            Ok(Some(c.barrier()))
        })
        .unwrap();
        assert!(matches!(out[0], Some(Err(CommError::Timeout { .. }))));
    }

    #[test]
    fn staggered_barrier_releases_after_last() {
        use std::time::Instant;
        let out = run(3, |mut c| {
            std::thread::sleep(Duration::from_millis(40 * c.rank() as u64));
            let t = Instant::now();
            c.barrier()?;
            Ok(t.elapsed())
        });
        assert!(out[0] >= Duration::from_millis(70));
    }

    #[test]
    fn broadcast_and_scatter() {
        let out = run(5, |mut c| {
            let b = c.broadcast(3, if c.rank() == 3 { b"hello".to_vec() } else { vec![] })?;
            let blocks = (c.rank() == 1).then(|| (0..5u8).map(|i| vec![i; 2]).collect());
            let s = c.scatter_from(1, blocks)?;
            Ok((b, s))
        });
        for (r, (b, s)) in out.iter().enumerate() {
            assert_eq!(b, b"hello");
            assert_eq!(s, &vec![r as u8; 2]);
        }
    }
}
