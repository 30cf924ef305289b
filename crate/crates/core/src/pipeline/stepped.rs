//! Single-context engine driven by an explicit schedule.
//!
//! The dispatcher, every worker and the flusher are state machines whose
//! steps are the individual shared-memory operations of the threaded engine.
//! A scheduler picks which enabled actor moves next, so every interleaving of
//! those operations can be replayed deterministically.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::preexit::{Emitter, PendingAnomaly, PreExitQueue};
use super::processor::Processor;
use super::route;
use super::watermark::{flush_bound, WorkerMark};
use crate::model::{Anomaly, ConfigError, Metadata, RunConfig};
use crate::wire;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Actor {
    Dispatcher,
    Worker(usize),
    Flusher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DispatchPhase {
    Reserve,
    SetClock { worker: usize, timestamp: u64 },
    Enqueue { worker: usize, timestamp: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WorkerPhase {
    Fetch,
    Process { message: usize, timestamp: u64 },
    Publish { timestamp: u64 },
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FlushPhase {
    ReadClock,
    /// Reads the in-flight count (or the idle flag in compat mode).
    ReadActivity(usize),
    ReadPublished(usize),
    Pop,
}

struct WorkerState {
    processor: Processor,
    queue: VecDeque<(usize, u64)>,
    phase: WorkerPhase,
    in_flight: usize,
    published: u64,
    idle: bool,
    seq: u64,
}

/// The engine under a caller-chosen schedule.
pub struct SteppedEngine<'a> {
    messages: &'a [Vec<u8>],
    compat: bool,
    capacity: usize,
    next_message: usize,
    dispatch: DispatchPhase,
    clock: u64,
    workers: Vec<WorkerState>,
    flush_phase: FlushPhase,
    snapshot_clock: u64,
    marks: Vec<WorkerMark>,
    progressed: bool,
    pre_exit: PreExitQueue,
    emitter: Emitter<Vec<Anomaly>>,
    steps: usize,
}

impl<'a> SteppedEngine<'a> {
    pub fn new(
        messages: &'a [Vec<u8>],
        metadata: &Metadata,
        config: &RunConfig,
    ) -> Result<Self, ConfigError> {
        let config = config.clone().validate()?;
        let workers = (0..config.worker_count)
            .map(|w| WorkerState {
                processor: Processor::new(metadata, &config, w),
                queue: VecDeque::new(),
                phase: WorkerPhase::Fetch,
                in_flight: 0,
                published: 0,
                idle: true,
                seq: 0,
            })
            .collect::<Vec<_>>();
        Ok(Self {
            messages,
            compat: config.compat_sentinel_watermark,
            capacity: config.queue_capacity,
            next_message: 0,
            dispatch: DispatchPhase::Reserve,
            clock: 0,
            marks: Vec::with_capacity(workers.len()),
            workers,
            flush_phase: FlushPhase::ReadClock,
            snapshot_clock: 0,
            progressed: false,
            pre_exit: PreExitQueue::new(),
            emitter: Emitter::new(Vec::new()),
            steps: 0,
        })
    }

    /// Actors that can take a step now.
    pub fn enabled(&self) -> Vec<Actor> {
        let mut out = Vec::with_capacity(self.workers.len() + 2);
        if self.dispatcher_enabled() {
            out.push(Actor::Dispatcher);
        }
        for (i, w) in self.workers.iter().enumerate() {
            let ready = match w.phase {
                WorkerPhase::Fetch => !w.queue.is_empty() || !w.idle,
                _ => true,
            };
            if ready {
                out.push(Actor::Worker(i));
            }
        }
        let flusher = match self.flush_phase {
            FlushPhase::ReadClock => self.progressed && !self.pre_exit.is_empty(),
            _ => true,
        };
        if flusher {
            out.push(Actor::Flusher);
        }
        out
    }

    fn dispatcher_enabled(&self) -> bool {
        match self.dispatch {
            DispatchPhase::Reserve => self.next_message < self.messages.len(),
            DispatchPhase::SetClock { .. } => true,
            DispatchPhase::Enqueue { worker, .. } => self.workers[worker].queue.len() < self.capacity,
        }
    }

    pub fn step(&mut self, actor: Actor) {
        self.steps += 1;
        match actor {
            Actor::Dispatcher => {
                self.step_dispatcher();
                self.progressed = true;
            }
            Actor::Worker(i) => {
                self.step_worker(i);
                self.progressed = true;
            }
            Actor::Flusher => self.step_flusher(),
        }
    }

    fn step_dispatcher(&mut self) {
        match self.dispatch {
            DispatchPhase::Reserve => {
                let message = &self.messages[self.next_message];
                match wire::parse_routing(message) {
                    Ok((machine, timestamp)) => {
                        let worker = route(machine, self.workers.len());
                        self.workers[worker].in_flight += 1;
                        self.dispatch = DispatchPhase::SetClock { worker, timestamp };
                    }
                    Err(_) => self.next_message += 1,
                }
            }
            DispatchPhase::SetClock { worker, timestamp } => {
                self.clock = self.clock.max(timestamp);
                self.dispatch = DispatchPhase::Enqueue { worker, timestamp };
            }
            DispatchPhase::Enqueue { worker, timestamp } => {
                self.workers[worker].queue.push_back((self.next_message, timestamp));
                self.next_message += 1;
                self.dispatch = DispatchPhase::Reserve;
            }
        }
    }

    fn step_worker(&mut self, i: usize) {
        let messages = self.messages;
        let pre_exit = &self.pre_exit;
        let w = &mut self.workers[i];
        match w.phase {
            WorkerPhase::Fetch => match w.queue.pop_front() {
                Some((message, timestamp)) => {
                    w.idle = false;
                    w.phase = WorkerPhase::Process { message, timestamp };
                }
                None => w.idle = true,
            },
            WorkerPhase::Process { message, timestamp } => {
                let seq = &mut w.seq;
                let _ = w.processor.process_message(&messages[message], &mut |detection| {
                    pre_exit.push(PendingAnomaly {
                        detection,
                        seq: *seq,
                        ingested: None,
                    });
                    *seq += 1;
                });
                w.phase = WorkerPhase::Publish { timestamp };
            }
            WorkerPhase::Publish { timestamp } => {
                w.published = w.published.max(timestamp);
                w.phase = WorkerPhase::Complete;
            }
            WorkerPhase::Complete => {
                w.in_flight -= 1;
                w.phase = WorkerPhase::Fetch;
            }
        }
    }

    fn step_flusher(&mut self) {
        match self.flush_phase {
            FlushPhase::ReadClock => {
                self.progressed = false;
                self.snapshot_clock = self.clock;
                self.marks.clear();
                self.flush_phase = FlushPhase::ReadActivity(0);
            }
            FlushPhase::ReadActivity(i) => {
                let w = &self.workers[i];
                let idle = if self.compat { w.idle } else { w.in_flight == 0 };
                if idle {
                    self.marks.push(WorkerMark::Idle);
                    self.flush_phase = self.after_mark(i);
                } else {
                    self.flush_phase = FlushPhase::ReadPublished(i);
                }
            }
            FlushPhase::ReadPublished(i) => {
                self.marks.push(WorkerMark::At(self.workers[i].published));
                self.flush_phase = self.after_mark(i);
            }
            FlushPhase::Pop => {
                let bound = flush_bound(&self.marks, self.snapshot_clock, self.compat);
                for p in self.pre_exit.pop_below(bound) {
                    self.emitter.emit(&p).expect("in-memory sink");
                }
                self.flush_phase = FlushPhase::ReadClock;
            }
        }
    }

    fn after_mark(&self, i: usize) -> FlushPhase {
        if i + 1 < self.workers.len() {
            FlushPhase::ReadActivity(i + 1)
        } else {
            FlushPhase::Pop
        }
    }

    /// True once input is exhausted and every worker is parked on an empty queue.
    pub fn is_quiescent(&self) -> bool {
        self.next_message == self.messages.len()
            && self.dispatch == DispatchPhase::Reserve
            && self
                .workers
                .iter()
                .all(|w| w.phase == WorkerPhase::Fetch && w.queue.is_empty())
    }

    /// End of stream: emits everything still pending.
    pub fn finish(&mut self) {
        assert!(self.is_quiescent(), "finish before the engine drained");
        for p in self.pre_exit.pop_below(u64::MAX) {
            self.emitter.emit(&p).expect("in-memory sink");
        }
    }

    pub fn emitted(&self) -> &[Anomaly] {
        self.emitter.sink()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Steps the scheduler's choices until nothing is enabled, then finishes.
    /// `choose` receives the enabled actors and returns an index into them.
    pub fn run_schedule(mut self, mut choose: impl FnMut(&[Actor]) -> usize) -> Vec<Anomaly> {
        loop {
            let enabled = self.enabled();
            if enabled.is_empty() {
                break;
            }
            let pick = choose(&enabled);
            self.step(enabled[pick]);
        }
        self.finish();
        self.emitter.into_sink()
    }
}

/// Outcome of checking many schedules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exploration {
    pub schedules: usize,
    /// Schedules whose emitted order keys were not sorted.
    pub unsorted: usize,
    /// Schedules whose output differed from the expected anomaly list.
    pub mismatched: usize,
    pub first_failure: Option<String>,
}

impl Exploration {
    pub fn passed(&self) -> bool {
        self.unsorted == 0 && self.mismatched == 0
    }

    fn record(&mut self, out: &[Anomaly], expected: &[Anomaly], label: impl FnOnce() -> String) {
        self.schedules += 1;
        let sorted = out.windows(2).all(|p| p[0].order_key() <= p[1].order_key());
        let equal = out == expected;
        if !sorted {
            self.unsorted += 1;
        }
        if !equal {
            self.mismatched += 1;
        }
        if (!sorted || !equal) && self.first_failure.is_none() {
            self.first_failure = Some(label());
        }
    }
}

/// Runs `count` schedules that pick uniformly among enabled actors.
pub fn explore_random(
    messages: &[Vec<u8>],
    metadata: &Metadata,
    config: &RunConfig,
    expected: &[Anomaly],
    count: usize,
    seed: u64,
) -> Result<Exploration, ConfigError> {
    let mut report = Exploration::default();
    for s in 0..count as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s));
        let engine = SteppedEngine::new(messages, metadata, config)?;
        let out = engine.run_schedule(|enabled| rng.gen_range(0..enabled.len()));
        report.record(&out, expected, || format!("random schedule seed {}", seed.wrapping_add(s)));
    }
    Ok(report)
}

/// Depth-first enumeration of schedules in lexicographic choice order,
/// stopping after `limit` complete schedules.
pub fn explore_exhaustive(
    messages: &[Vec<u8>],
    metadata: &Metadata,
    config: &RunConfig,
    expected: &[Anomaly],
    limit: usize,
) -> Result<Exploration, ConfigError> {
    let mut report = Exploration::default();
    // (choice taken, number of alternatives) at every step of the current path
    let mut path: Vec<(usize, usize)> = Vec::new();
    loop {
        let engine = SteppedEngine::new(messages, metadata, config)?;
        let mut depth = 0;
        let out = engine.run_schedule(|enabled| {
            let pick = if depth < path.len() {
                path[depth].0
            } else {
                path.push((0, enabled.len()));
                0
            };
            depth += 1;
            pick
        });
        report.record(&out, expected, || {
            let choices: Vec<String> = path.iter().map(|c| c.0.to_string()).collect();
            format!("choice path [{}]", choices.join(","))
        });
        if report.schedules >= limit {
            break;
        }
        while let Some((choice, alternatives)) = path.pop() {
            if choice + 1 < alternatives {
                path.push((choice + 1, alternatives));
                break;
            }
        }
        if path.is_empty() {
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObservationGroup, SensorKey, SensorMetadata};
    use crate::oracle::oracle_run;
    use crate::wire::serialize_group;

    fn scenario() -> (Vec<Vec<u8>>, Metadata, RunConfig) {
        let mut meta = Metadata::new();
        for m in 0..4 {
            meta.insert(SensorKey::new(m, 0), SensorMetadata { clusters: 2, stateful: true });
        }
        let mut messages = Vec::new();
        let mut group = 0;
        for tick in 0..6u64 {
            for m in 0..4u64 {
                messages.push(serialize_group(&ObservationGroup {
                    group_id: group,
                    machine_id: m as u32,
                    timestamp: tick * 10 + (m / 2) * 3,
                    readings: vec![(0, if (tick + m) % 3 == 2 { 5.0 } else { 1.0 })],
                }));
                group += 1;
            }
        }
        let config = RunConfig { window_size: 3, threshold: 1.0, worker_count: 2, ..RunConfig::default() };
        (messages, meta, config)
    }

    #[test]
    fn in_order_schedule_matches_oracle() {
        let (messages, meta, config) = scenario();
        let expected = oracle_run(&messages, &meta, &config).unwrap();
        assert!(!expected.is_empty());
        let engine = SteppedEngine::new(&messages, &meta, &config).unwrap();
        assert_eq!(engine.run_schedule(|_| 0), expected);
    }

    #[test]
    fn enumerated_schedules_stay_ordered() {
        let (messages, meta, config) = scenario();
        let expected = oracle_run(&messages, &meta, &config).unwrap();
        let dfs = explore_exhaustive(&messages, &meta, &config, &expected, 500).unwrap();
        assert_eq!(dfs.schedules, 500);
        assert!(dfs.passed(), "{dfs:?}");
        let random = explore_random(&messages, &meta, &config, &expected, 500, 1).unwrap();
        assert!(random.passed(), "{random:?}");
    }

    /// Starves worker 0 for as long as anything else can move.
    fn starve_first_worker(enabled: &[Actor]) -> usize {
        enabled.iter().position(|a| *a != Actor::Worker(0)).unwrap_or(0)
    }

    #[test]
    fn sentinel_watermark_admits_reordering() {
        let (messages, meta, config) = scenario();
        let expected = oracle_run(&messages, &meta, &config).unwrap();

        let safe = SteppedEngine::new(&messages, &meta, &config).unwrap();
        assert_eq!(safe.run_schedule(starve_first_worker), expected);

        let compat = RunConfig { compat_sentinel_watermark: true, ..config };
        let engine = SteppedEngine::new(&messages, &meta, &compat).unwrap();
        let out = engine.run_schedule(starve_first_worker);
        assert!(out.windows(2).any(|p| p[0].order_key() > p[1].order_key()));
    }
}
