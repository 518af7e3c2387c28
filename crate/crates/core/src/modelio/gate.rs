use std::sync::{Condvar, Mutex};

#[derive(Debug, Default)]
struct GateState {
    current: usize,
    peak: usize,
}

/// Counting semaphore bounding the number of outstanding requests.
///
/// Also records the peak concurrency observed, which tests use to check the
/// bound holds.
#[derive(Debug)]
pub struct InflightGate {
    limit: usize,
    state: Mutex<GateState>,
    released: Condvar,
}

impl InflightGate {
    pub fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            state: Mutex::new(GateState::default()),
            released: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
        while st.current >= self.limit {
            st = self
                .released
                .wait(st)
                .unwrap_or_else(|e| e.into_inner());
        }
        st.current += 1;
        st.peak = st.peak.max(st.current);
        Permit { gate: self }
    }

    pub fn peak(&self) -> usize {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).peak
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).current
    }
}

#[must_use]
pub struct Permit<'a> {
    gate: &'a InflightGate,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.gate.state.lock().unwrap_or_else(|e| e.into_inner());
        st.current -= 1;
        drop(st);
        self.gate.released.notify_one();
    }
}
