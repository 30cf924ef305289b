//! Pre-exit priority queue and the emitter that numbers anomalies.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Mutex;
use std::time::Instant;

use super::transport::{AnomalySink, SinkError};
use super::Detection;
use crate::model::Anomaly;

/// A detected anomaly waiting for the watermark.
#[derive(Debug, Clone, Copy)]
pub struct PendingAnomaly {
    pub detection: Detection,
    /// Detection order within the producing worker; breaks ties between
    /// anomalies of one sensor at one timestamp.
    pub seq: u64,
    /// When the message that completed the window was taken from the input.
    pub ingested: Option<Instant>,
}

impl PendingAnomaly {
    pub fn order_key(&self) -> (u64, u32, u32, u64) {
        let d = &self.detection;
        (d.timestamp, d.machine, d.property, self.seq)
    }
}

impl PartialEq for PendingAnomaly {
    fn eq(&self, other: &Self) -> bool {
        self.order_key() == other.order_key()
    }
}

impl Eq for PendingAnomaly {}

impl PartialOrd for PendingAnomaly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PendingAnomaly {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

/// Min-heap on the order key. Workers push concurrently; only the flusher pops.
#[derive(Debug, Default)]
pub struct PreExitQueue {
    heap: Mutex<BinaryHeap<Reverse<PendingAnomaly>>>,
}

impl PreExitQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, pending: PendingAnomaly) {
        self.heap.lock().expect("pre-exit queue poisoned").push(Reverse(pending));
    }

    pub fn len(&self) -> usize {
        self.heap.lock().expect("pre-exit queue poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removes every entry with timestamp strictly below `bound`, ascending.
    pub fn pop_below(&self, bound: u64) -> Vec<PendingAnomaly> {
        let mut heap = self.heap.lock().expect("pre-exit queue poisoned");
        let mut out = Vec::new();
        while let Some(Reverse(top)) = heap.peek() {
            if top.detection.timestamp >= bound {
                break;
            }
            out.push(heap.pop().expect("peeked").0);
        }
        out
    }
}

/// Assigns consecutive ids at emission time and forwards to a sink.
#[derive(Debug)]
pub struct Emitter<S> {
    sink: S,
    next_id: u64,
    latency_sum_ms: f64,
    latency_samples: u64,
}

impl<S: AnomalySink> Emitter<S> {
    pub fn new(sink: S) -> Self {
        Self {
            sink,
            next_id: 0,
            latency_sum_ms: 0.0,
            latency_samples: 0,
        }
    }

    pub fn emit(&mut self, pending: &PendingAnomaly) -> Result<(), SinkError> {
        let d = &pending.detection;
        let anomaly = Anomaly {
            id: self.next_id,
            machine: d.machine,
            property: d.property,
            timestamp: d.timestamp,
            probability: d.probability,
        };
        self.sink.emit(&anomaly)?;
        self.next_id += 1;
        if let Some(at) = pending.ingested {
            self.latency_sum_ms += at.elapsed().as_secs_f64() * 1e3;
            self.latency_samples += 1;
        }
        Ok(())
    }

    pub fn finish(&mut self) -> Result<(), SinkError> {
        self.sink.finish()
    }

    pub fn emitted(&self) -> u64 {
        self.next_id
    }

    pub fn mean_latency_ms(&self) -> Option<f64> {
        (self.latency_samples > 0).then(|| self.latency_sum_ms / self.latency_samples as f64)
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_sink(self) -> S {
        self.sink
    }
}

/// Emits every queued anomaly below `bound`; returns how many were emitted.
pub fn flush<S: AnomalySink>(
    queue: &PreExitQueue,
    bound: u64,
    emitter: &mut Emitter<S>,
) -> Result<usize, SinkError> {
    let batch = queue.pop_below(bound);
    for p in &batch {
        emitter.emit(p)?;
    }
    Ok(batch.len())
}
