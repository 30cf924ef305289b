//! Threaded engine: one dispatcher, `worker_count` workers, one flusher.

use std::sync::atomic::{AtomicBool, Ordering::SeqCst};
use std::sync::mpsc::{self, sync_channel, TryRecvError};
use std::thread;
use std::time::Instant;

use super::preexit::{flush, Emitter, PendingAnomaly, PreExitQueue};
use super::processor::{Counters, Processor};
use super::transport::{AnomalySink, MessageSource};
use super::watermark::Watermark;
use super::{route, RunError, RunReport};
use crate::model::{ConfigError, Metadata, RunConfig};
use crate::wire;

struct Job<'a> {
    message: &'a [u8],
    timestamp: u64,
    ingested: Instant,
}

/// Worker processors plus the configuration they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    config: RunConfig,
    processors: Vec<Processor>,
}

impl Engine {
    pub fn new(metadata: &Metadata, config: RunConfig) -> Result<Self, ConfigError> {
        let config = config.validate()?;
        let processors = (0..config.worker_count)
            .map(|w| Processor::new(metadata, &config, w))
            .collect();
        Ok(Self { config, processors })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn processors(&self) -> &[Processor] {
        &self.processors
    }

    /// Runs the full chain `passes` times over `corpus`, discarding every
    /// output, then resets all state.
    pub fn warmup(&mut self, corpus: &[&[u8]], passes: usize) {
        if passes == 0 {
            return;
        }
        let workers = self.processors.len();
        for _ in 0..passes {
            for message in corpus {
                if let Ok(machine) = wire::parse_machine_id_fast(message) {
                    let _ = self.processors[route(machine, workers)]
                        .process_message(message, &mut |_| {});
                }
            }
            self.reset();
        }
    }

    pub fn reset(&mut self) {
        for p in &mut self.processors {
            p.reset();
        }
    }

    /// Streams `source` through the engine into `sink`.
    pub fn run<'a, I, S>(&mut self, mut source: I, sink: S) -> Result<RunReport, RunError>
    where
        I: MessageSource<'a>,
        S: AnomalySink + Send,
    {
        let started = Instant::now();
        let config = self.config.clone();
        let workers = self.processors.len();
        let watermark = Watermark::new(workers, config.compat_sentinel_watermark);
        let pre_exit = PreExitQueue::new();
        let finished = AtomicBool::new(false);
        let sync = config.synchronized_output;

        let mut messages = 0u64;
        let mut bytes = 0u64;
        let mut dispatch_errors = 0u64;
        let mut transport_error = None;

        let (direct_tx, direct_rx) = mpsc::channel::<PendingAnomaly>();

        let (counters, emitted) = thread::scope(|scope| {
            let watermark = &watermark;
            let pre_exit = &pre_exit;
            let finished = &finished;

            let flusher = scope.spawn(move || -> Result<_, RunError> {
                let mut emitter = Emitter::new(sink);
                if sync {
                    loop {
                        let last = finished.load(SeqCst);
                        let bound = if last { u64::MAX } else { watermark.bound() };
                        flush(pre_exit, bound, &mut emitter)?;
                        if last {
                            break;
                        }
                        thread::park_timeout(config.flush_interval);
                    }
                } else {
                    for pending in direct_rx {
                        emitter.emit(&pending)?;
                    }
                }
                emitter.finish()?;
                Ok((emitter.emitted(), emitter.mean_latency_ms()))
            });
            let flusher_thread = flusher.thread().clone();

            let mut senders = Vec::with_capacity(workers);
            let mut handles = Vec::with_capacity(workers);
            for (index, processor) in self.processors.iter_mut().enumerate() {
                let (tx, rx) = sync_channel::<Job<'a>>(config.queue_capacity);
                senders.push(tx);
                let direct = direct_tx.clone();
                let flusher_thread = flusher_thread.clone();
                handles.push(scope.spawn(move || {
                    let before = *processor.counters();
                    let mut seq = 0u64;
                    loop {
                        let job = match rx.try_recv() {
                            Ok(job) => job,
                            Err(TryRecvError::Empty) => {
                                watermark.idle(index);
                                match rx.recv() {
                                    Ok(job) => job,
                                    Err(_) => break,
                                }
                            }
                            Err(TryRecvError::Disconnected) => break,
                        };
                        watermark.busy(index);
                        let mut push = |detection| {
                            let pending = PendingAnomaly {
                                detection,
                                seq,
                                ingested: Some(job.ingested),
                            };
                            seq += 1;
                            if sync {
                                pre_exit.push(pending);
                            } else {
                                let _ = direct.send(pending);
                            }
                        };
                        let _ = processor.process_message(job.message, &mut push);
                        watermark.publish(index, job.timestamp);
                        watermark.complete(index);
                        if sync {
                            flusher_thread.unpark();
                        }
                    }
                    watermark.idle(index);
                    processor.counters().since(&before)
                }));
            }
            drop(direct_tx);

            while let Some(next) = source.next_message() {
                let message = match next {
                    Ok(m) => m,
                    Err(e) => {
                        transport_error = Some(e);
                        break;
                    }
                };
                let ingested = Instant::now();
                messages += 1;
                bytes += message.len() as u64;
                let Ok((machine, timestamp)) = wire::parse_routing(message) else {
                    dispatch_errors += 1;
                    continue;
                };
                let worker = route(machine, workers);
                watermark.reserve(worker, timestamp);
                let job = Job { message, timestamp, ingested };
                if senders[worker].send(job).is_err() {
                    break;
                }
            }
            drop(senders);

            let mut counters = Counters::default();
            for h in handles {
                match h.join() {
                    Ok(c) => counters.merge(&c),
                    Err(panic) => std::panic::resume_unwind(panic),
                }
            }
            finished.store(true, SeqCst);
            flusher_thread.unpark();
            let emitted = match flusher.join() {
                Ok(r) => r,
                Err(panic) => std::panic::resume_unwind(panic),
            };
            (counters, emitted)
        });

        if let Some(e) = transport_error {
            return Err(e.into());
        }
        let (anomalies, mean_latency_ms) = emitted?;
        Ok(RunReport {
            messages,
            windows: counters.windows,
            first_windows: counters.first_windows,
            inout: counters.inout,
            k1: counters.k1,
            lowk: counters.lowk,
            full: counters.full,
            sorted: counters.sorted,
            anomalies,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            parse_errors: counters.parse_errors + dispatch_errors,
            bytes,
            mean_latency_ms,
        })
    }
}
