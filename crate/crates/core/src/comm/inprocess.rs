//! Backend running every rank as a thread of the current process.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::mailbox::Mailbox;
use super::{CommError, Communicator, Transport, DEFAULT_TIMEOUT};

pub(crate) struct Group {
    mailboxes: Vec<Mailbox>,
}

impl Group {
    fn abort_all(&self, reason: &str) {
        for mb in &self.mailboxes {
            mb.abort(reason);
        }
    }
}

pub(crate) struct InProcess {
    rank: usize,
    group: Arc<Group>,
}

impl Transport for InProcess {
    fn send(&self, dst: usize, tag: u32, payload: Vec<u8>) -> Result<(), CommError> {
        self.group.mailboxes[dst].push(self.rank, tag, payload);
        Ok(())
    }

    fn recv(&self, src: usize, tag: u32, timeout: Duration) -> Result<Vec<u8>, CommError> {
        self.group.mailboxes[self.rank].pop(src, tag, timeout)
    }
}

/// Why one rank of an in-process group did not complete.
#[derive(Debug)]
pub enum RankFailure<E> {
    Error(E),
    Panic(String),
}

impl<E: fmt::Display> fmt::Display for RankFailure<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankFailure::Error(e) => write!(f, "{e}"),
            RankFailure::Panic(msg) => write!(f, "panicked: {msg}"),
        }
    }
}

/// Error returned by [`spawn_inprocess`] when any rank fails.
///
/// `first` is the rank whose failure aborted the group; the others usually
/// report the abort itself.
#[derive(Debug)]
pub struct GroupFailure<E> {
    pub first: usize,
    pub failures: Vec<(usize, RankFailure<E>)>,
}

impl<E> GroupFailure<E> {
    /// The failure of the rank that triggered the abort.
    pub fn root_cause(&self) -> &RankFailure<E> {
        &self
            .failures
            .iter()
            .find(|(r, _)| *r == self.first)
            .expect("first failing rank is recorded")
            .1
    }

    pub fn into_root_cause(self) -> RankFailure<E> {
        let first = self.first;
        self.failures
            .into_iter()
            .find(|(r, _)| *r == first)
            .expect("first failing rank is recorded")
            .1
    }
}

impl<E: fmt::Display> fmt::Display for GroupFailure<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rank {} failed: {}", self.first, self.root_cause())
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for GroupFailure<E> {}

/// Runs `program` on `n_ranks` threads, each with its own [`Communicator`],
/// and returns the per-rank results in rank order.
///
/// The first rank to fail aborts every pending receive in the group.
pub fn spawn_inprocess<R, E, F>(n_ranks: usize, program: F) -> Result<Vec<R>, GroupFailure<E>>
where
    F: Fn(Communicator) -> Result<R, E> + Sync,
    R: Send,
    E: Send + fmt::Display,
{
    spawn_inprocess_with_timeout(n_ranks, DEFAULT_TIMEOUT, program)
}

pub fn spawn_inprocess_with_timeout<R, E, F>(
    n_ranks: usize,
    timeout: Duration,
    program: F,
) -> Result<Vec<R>, GroupFailure<E>>
where
    F: Fn(Communicator) -> Result<R, E> + Sync,
    R: Send,
    E: Send + fmt::Display,
{
    assert!(n_ranks >= 1, "a group needs at least one rank");
    let group = Arc::new(Group { mailboxes: (0..n_ranks).map(|_| Mailbox::default()).collect() });
    let first: Mutex<Option<usize>> = Mutex::new(None);

    let outcomes: Vec<Result<R, RankFailure<E>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n_ranks)
            .map(|rank| {
                let group = Arc::clone(&group);
                let program = &program;
                let first = &first;
                std::thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .spawn_scoped(s, move || {
                        let transport = InProcess { rank, group: Arc::clone(&group) };
                        let comm = Communicator::new(rank, n_ranks, Box::new(transport), timeout);
                        let outcome = match catch_unwind(AssertUnwindSafe(|| program(comm))) {
                            Ok(Ok(r)) => return Ok(r),
                            Ok(Err(e)) => RankFailure::Error(e),
                            Err(p) => RankFailure::Panic(panic_message(p)),
                        };
                        let mut f = first.lock().unwrap();
                        if f.is_none() {
                            *f = Some(rank);
                            group.abort_all(&format!("rank {rank} failed: {outcome}"));
                        }
                        Err(outcome)
                    })
                    .expect("spawn rank thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| Err(RankFailure::Panic(panic_message(p)))))
            .collect()
    });

    let mut results = Vec::with_capacity(n_ranks);
    let mut failures = Vec::new();
    for (rank, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(r) => results.push(r),
            Err(e) => failures.push((rank, e)),
        }
    }
    if failures.is_empty() {
        Ok(results)
    } else {
        let first = first.into_inner().unwrap().unwrap_or(failures[0].0);
        Err(GroupFailure { first, failures })
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}
