//! Watermark tracking.
//!
//! Each worker publishes the timestamp of the last message it finished. A
//! worker with nothing in flight contributes the dispatcher clock instead,
//! since every later message carries a timestamp at least that large. In
//! compatibility mode an idle worker contributes the maximum timestamp, which
//! reproduces the original starvation sentinel and its race.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering::SeqCst};

/// One worker's contribution as seen by the flusher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerMark {
    Idle,
    At(u64),
}

/// Minimum over workers; idle workers count as `clock`, or as `u64::MAX`
/// when `compat` is set.
pub fn flush_bound(marks: &[WorkerMark], clock: u64, compat: bool) -> u64 {
    marks
        .iter()
        .map(|m| match m {
            WorkerMark::At(ts) => *ts,
            WorkerMark::Idle if compat => u64::MAX,
            WorkerMark::Idle => clock,
        })
        .min()
        .unwrap_or(clock)
}

#[derive(Debug, Default)]
struct Slot {
    published: AtomicU64,
    in_flight: AtomicUsize,
    /// Set by the worker itself when it finds its queue empty.
    idle: AtomicBool,
}

/// Shared watermark state. Writers never block.
#[derive(Debug)]
pub struct Watermark {
    slots: Vec<Slot>,
    clock: AtomicU64,
    compat: bool,
}

impl Watermark {
    pub fn new(workers: usize, compat: bool) -> Self {
        Self {
            slots: (0..workers)
                .map(|_| Slot {
                    idle: AtomicBool::new(true),
                    ..Slot::default()
                })
                .collect(),
            clock: AtomicU64::new(0),
            compat,
        }
    }

    /// Dispatcher, before enqueueing a message for `worker`.
    pub fn reserve(&self, worker: usize, timestamp: u64) {
        self.slots[worker].in_flight.fetch_add(1, SeqCst);
        self.clock.fetch_max(timestamp, SeqCst);
    }

    /// Worker, on taking a message off its queue.
    pub fn busy(&self, worker: usize) {
        self.slots[worker].idle.store(false, SeqCst);
    }

    /// Worker, after all anomalies of a message were pushed.
    pub fn publish(&self, worker: usize, timestamp: u64) {
        self.slots[worker].published.fetch_max(timestamp, SeqCst);
    }

    /// Worker, last step for a message.
    pub fn complete(&self, worker: usize) {
        self.slots[worker].in_flight.fetch_sub(1, SeqCst);
    }

    /// Worker, when its queue turned out empty.
    pub fn idle(&self, worker: usize) {
        self.slots[worker].idle.store(true, SeqCst);
    }

    pub fn clock(&self) -> u64 {
        self.clock.load(SeqCst)
    }

    /// Snapshot read by the flusher: clock first, then every worker.
    pub fn bound(&self) -> u64 {
        let clock = self.clock.load(SeqCst);
        if self.slots.is_empty() {
            return clock;
        }
        let mut bound = u64::MAX;
        for slot in &self.slots {
            let mark = if self.compat {
                if slot.idle.load(SeqCst) {
                    WorkerMark::Idle
                } else {
                    WorkerMark::At(slot.published.load(SeqCst))
                }
            } else if slot.in_flight.load(SeqCst) == 0 {
                WorkerMark::Idle
            } else {
                WorkerMark::At(slot.published.load(SeqCst))
            };
            bound = bound.min(flush_bound(&[mark], clock, self.compat));
        }
        bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimum_of_published() {
        let marks = [WorkerMark::At(5), WorkerMark::At(7), WorkerMark::At(9)];
        assert_eq!(flush_bound(&marks, 9, false), 5);
    }

    #[test]
    fn idle_worker_contributes_clock() {
        assert_eq!(flush_bound(&[WorkerMark::Idle, WorkerMark::At(7)], 7, false), 7);
        assert_eq!(flush_bound(&[WorkerMark::Idle, WorkerMark::Idle], 4, false), 4);
        assert_eq!(flush_bound(&[WorkerMark::Idle, WorkerMark::At(7)], 3, true), 7);
        assert_eq!(flush_bound(&[WorkerMark::Idle], 3, true), u64::MAX);
    }

    #[test]
    fn shared_state_round_trip() {
        let w = Watermark::new(2, false);
        assert_eq!(w.bound(), 0);
        w.reserve(0, 10);
        assert_eq!(w.bound(), 0);
        w.busy(0);
        w.publish(0, 10);
        w.complete(0);
        assert_eq!(w.bound(), 10);
        w.reserve(1, 20);
        assert_eq!(w.bound(), 0);
        w.publish(1, 20);
        w.complete(1);
        assert_eq!(w.bound(), 20);
    }
}
