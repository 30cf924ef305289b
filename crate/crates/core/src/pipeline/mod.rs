//! The concurrent engine.
//!
//! A dispatcher reads each message's machine id and timestamp at fixed
//! offsets and hands the raw bytes to worker `machine mod workers` over a
//! bounded queue. Workers own the windows of their machines, parse readings
//! one at a time and run the chain on every full window. Detected anomalies
//! wait in a priority queue until the watermark passes their timestamp, so
//! output is globally ordered by `(timestamp, machine, property)`.
//!
//! [`stepped`] runs the same components in one context under an explicit
//! schedule, for interleaving tests.

mod engine;
pub mod preexit;
pub mod processor;
pub mod stepped;
pub mod transport;
pub mod watermark;

use std::fmt;

use thiserror::Error;

use crate::model::{ConfigError, Metadata, RunConfig};

pub use engine::Engine;
pub use preexit::{flush, Emitter, PendingAnomaly, PreExitQueue};
pub use processor::{Counters, Detection, Processor};
pub use transport::{
    write_anomalies, AnomalySink, MemorySource, MessageSource, NullSink, Replay, SinkError,
    TextSink, TransportError,
};
pub use watermark::{flush_bound, Watermark, WorkerMark};

/// Worker that owns `machine`.
#[inline]
pub fn route(machine: u32, workers: usize) -> usize {
    machine as usize % workers
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Sink(#[from] SinkError),
}

/// Counters of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunReport {
    pub messages: u64,
    /// Full windows processed; the four trigger counters below sum to it.
    pub windows: u64,
    /// Windows that became full for the first time; they have no predecessor
    /// to reuse.
    pub first_windows: u64,
    pub inout: u64,
    pub k1: u64,
    pub lowk: u64,
    pub full: u64,
    /// Full passes done by the sorted sweep, included in `full`.
    pub sorted: u64,
    pub anomalies: u64,
    pub wall_ms: f64,
    pub parse_errors: u64,
    pub bytes: u64,
    pub mean_latency_ms: Option<f64>,
}

impl RunReport {
    /// Full windows that had a predecessor.
    pub fn post_fill_windows(&self) -> u64 {
        self.windows - self.first_windows
    }

    /// Input megabytes (10^6 bytes) per second of wall time.
    pub fn throughput_mb_s(&self) -> f64 {
        if self.wall_ms <= 0.0 {
            return 0.0;
        }
        self.bytes as f64 / 1e6 / (self.wall_ms / 1e3)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "messages={}", self.messages)?;
        writeln!(f, "windows={}", self.windows)?;
        writeln!(f, "first_windows={}", self.first_windows)?;
        writeln!(f, "inout={}", self.inout)?;
        writeln!(f, "k1={}", self.k1)?;
        writeln!(f, "lowk={}", self.lowk)?;
        writeln!(f, "full={}", self.full)?;
        writeln!(f, "anomalies={}", self.anomalies)?;
        writeln!(f, "wall_ms={:.3}", self.wall_ms)?;
        writeln!(f, "parse_errors={}", self.parse_errors)?;
        writeln!(f, "bytes={}", self.bytes)?;
        match self.mean_latency_ms {
            Some(ms) => write!(f, "latency_ms={ms:.6}"),
            None => write!(f, "latency_ms=n/a"),
        }
    }
}

/// Builds an engine for `metadata` and streams `source` into `sink`. No warmup.
pub fn run<'a, I, S>(
    source: I,
    sink: S,
    metadata: &Metadata,
    config: RunConfig,
) -> Result<RunReport, RunError>
where
    I: MessageSource<'a>,
    S: AnomalySink + Send,
{
    Engine::new(metadata, config)?.run(source, sink)
}
