use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::CommError;

#[derive(Default)]
struct MailState {
    queues: HashMap<(usize, u32), VecDeque<Vec<u8>>>,
    aborted: Option<String>,
    disconnected: HashSet<usize>,
}

/// Incoming message store of one rank, matched on `(src, tag)` in FIFO order.
#[derive(Default)]
pub(crate) struct Mailbox {
    state: Mutex<MailState>,
    ready: Condvar,
}

impl Mailbox {
    pub(crate) fn push(&self, src: usize, tag: u32, payload: Vec<u8>) {
        let mut st = self.state.lock().unwrap();
        st.queues.entry((src, tag)).or_default().push_back(payload);
        self.ready.notify_all();
    }

    pub(crate) fn abort(&self, reason: &str) {
        let mut st = self.state.lock().unwrap();
        if st.aborted.is_none() {
            st.aborted = Some(reason.to_string());
        }
        self.ready.notify_all();
    }

    pub(crate) fn disconnect(&self, src: usize) {
        let mut st = self.state.lock().unwrap();
        st.disconnected.insert(src);
        self.ready.notify_all();
    }

    pub(crate) fn pop(&self, src: usize, tag: u32, timeout: Duration) -> Result<Vec<u8>, CommError> {
        let deadline = Instant::now() + timeout;
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(q) = st.queues.get_mut(&(src, tag)) {
                if let Some(msg) = q.pop_front() {
                    if q.is_empty() {
                        st.queues.remove(&(src, tag));
                    }
                    return Ok(msg);
                }
            }
            if let Some(reason) = &st.aborted {
                return Err(CommError::Aborted { reason: reason.clone() });
            }
            if st.disconnected.contains(&src) {
                return Err(CommError::Disconnected { peer: src });
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(CommError::Timeout { peer: src, tag, after: timeout });
            }
            st = self.ready.wait_timeout(st, deadline - now).unwrap().0;
        }
    }
}
