//! The per-worker processing chain.

use crate::clustering::{apply_lowk, in_out_check, kmeans_full, reuse_clusters, sorted_sweep_kmeans};
use crate::model::{Metadata, RunConfig, SensorKey};
use crate::modeling::{count_transitions, detect};
use crate::window::{SensorWindow, WindowStore};
use crate::wire::{self, ParseError};

/// Per-worker counters. `windows` counts full windows only and always equals
/// `inout + k1 + lowk + full`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub messages: u64,
    pub windows: u64,
    /// Windows that just became full for the first time.
    pub first_windows: u64,
    pub inout: u64,
    pub k1: u64,
    pub lowk: u64,
    pub full: u64,
    /// Subset of `full` computed by the sorted sweep.
    pub sorted: u64,
    pub detected: u64,
    pub parse_errors: u64,
}

impl Counters {
    pub fn merge(&mut self, other: &Counters) {
        self.messages += other.messages;
        self.windows += other.windows;
        self.first_windows += other.first_windows;
        self.inout += other.inout;
        self.k1 += other.k1;
        self.lowk += other.lowk;
        self.full += other.full;
        self.sorted += other.sorted;
        self.detected += other.detected;
        self.parse_errors += other.parse_errors;
    }

    /// Increments accumulated after the snapshot `earlier`.
    pub fn since(&self, earlier: &Counters) -> Counters {
        Counters {
            messages: self.messages - earlier.messages,
            windows: self.windows - earlier.windows,
            first_windows: self.first_windows - earlier.first_windows,
            inout: self.inout - earlier.inout,
            k1: self.k1 - earlier.k1,
            lowk: self.lowk - earlier.lowk,
            full: self.full - earlier.full,
            sorted: self.sorted - earlier.sorted,
            detected: self.detected - earlier.detected,
            parse_errors: self.parse_errors - earlier.parse_errors,
        }
    }
}

/// A window whose composed probability fell below the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub machine: u32,
    pub property: u32,
    pub timestamp: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Settings {
    transitions: usize,
    threshold: f64,
    max_iter: usize,
    force_full: bool,
    sorted_sweep: bool,
}

/// Owns the windows of the machines routed to one worker and runs the chain
/// on every reading of their messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Processor {
    store: WindowStore,
    settings: Settings,
    counters: Counters,
    tail: Vec<u32>,
}

impl Processor {
    pub fn new(metadata: &Metadata, config: &RunConfig, worker: usize) -> Self {
        let sorted_sweep = config.sorted_sweep_enabled() && !config.force_full;
        Self {
            store: WindowStore::for_worker(
                metadata,
                config.window_size,
                sorted_sweep,
                worker,
                config.worker_count,
            ),
            settings: Settings {
                transitions: config.transitions,
                threshold: config.threshold,
                max_iter: config.max_kmeans_iterations,
                force_full: config.force_full,
                sorted_sweep,
            },
            counters: Counters::default(),
            tail: Vec::with_capacity(config.transitions + 1),
        }
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn store(&self) -> &WindowStore {
        &self.store
    }

    /// Clears all window state and counters.
    pub fn reset(&mut self) {
        self.store.reset();
        self.counters = Counters::default();
        self.tail.clear();
    }

    /// Parses `message` one reading at a time, pushing each through the chain
    /// before the next is extracted. Returns the header timestamp.
    ///
    /// On a parse error the readings already processed stay applied and the
    /// error is counted.
    pub fn process_message(
        &mut self,
        message: &[u8],
        emit: &mut impl FnMut(Detection),
    ) -> Result<u64, ParseError> {
        self.counters.messages += 1;
        let result = self.stream(message, emit);
        if result.is_err() {
            self.counters.parse_errors += 1;
        }
        result
    }

    fn stream(&mut self, message: &[u8], emit: &mut impl FnMut(Detection)) -> Result<u64, ParseError> {
        let header = wire::parse_header(message)?;
        let mut cursor = header.cursor;
        let machine = header.machine_id;
        while let Some((property, value)) = wire::parse_next_reading(message, &mut cursor)? {
            let Some(w) = self.store.lookup_mut(SensorKey::new(machine, property)) else {
                continue;
            };
            let evicted = w.slide(value);
            if !w.is_full() {
                continue;
            }
            if evicted.is_none() {
                self.counters.first_windows += 1;
            }
            if let Some(probability) =
                process_window(w, &self.settings, &mut self.counters, &mut self.tail)
            {
                self.counters.detected += 1;
                emit(Detection {
                    machine,
                    property,
                    timestamp: header.timestamp,
                    probability,
                });
            }
        }
        Ok(header.timestamp)
    }
}

/// Runs clustering, modeling and detection on a full window.
fn process_window(
    w: &mut SensorWindow,
    settings: &Settings,
    counters: &mut Counters,
    tail: &mut Vec<u32>,
) -> Option<f64> {
    counters.windows += 1;
    let k = w.clusters();

    if settings.force_full {
        counters.full += 1;
        let r = kmeans_full(w.contiguous(), k, settings.max_iter);
        w.counts = count_transitions(&r.assignments);
        w.install(r.centroids, &r.assignments);
        return detect_tail(w, settings, tail);
    }

    // The prefix state must follow every slide, whichever path runs.
    let inout = if w.is_primed() {
        in_out_check(w)
    } else {
        w.prime();
        false
    };

    let distinct = w.distinct_count();
    if k == 1 || distinct == 1 {
        counters.k1 += 1;
        w.invalidate();
        return None;
    }
    if distinct < k {
        counters.lowk += 1;
        let r = apply_lowk(w.contiguous(), k).expect("1 < D < K");
        w.counts = count_transitions(&r.assignments);
        w.install(r.centroids, &r.assignments);
        return detect_tail(w, settings, tail);
    }
    if inout && w.has_clustering() {
        counters.inout += 1;
        let seq = &w.cluster_sequence;
        let len = seq.len();
        let dropped = (seq[0], seq[1]);
        let added = (seq[len - 1], seq[0]);
        w.counts
            .shift(dropped, added)
            .expect("transition counts consistent with the reused sequence");
        reuse_clusters(w);
        return detect_tail(w, settings, tail);
    }

    counters.full += 1;
    w.values.make_contiguous();
    let r = match (&w.sorted, settings.sorted_sweep) {
        (Some(sorted), true) => {
            counters.sorted += 1;
            sorted_sweep_kmeans(w.values.as_slices().0, sorted, k, settings.max_iter)
        }
        _ => kmeans_full(w.values.as_slices().0, k, settings.max_iter),
    };
    w.counts = count_transitions(&r.assignments);
    w.install(r.centroids, &r.assignments);
    detect_tail(w, settings, tail)
}

fn detect_tail(w: &SensorWindow, settings: &Settings, tail: &mut Vec<u32>) -> Option<f64> {
    let seq = &w.cluster_sequence;
    let take = (settings.transitions + 1).min(seq.len());
    tail.clear();
    tail.extend(seq.range(seq.len() - take..).copied());
    detect(tail, &w.counts, settings.transitions, settings.threshold)
        .expect("detected pairs come from the counted sequence")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObservationGroup, SensorMetadata};
    use crate::wire::serialize_group;

    fn meta(k: usize) -> Metadata {
        let mut m = Metadata::new();
        m.insert(SensorKey::new(0, 0), SensorMetadata { clusters: k, stateful: true });
        m.insert(SensorKey::new(0, 1), SensorMetadata { clusters: k, stateful: false });
        m
    }

    fn message(i: u64, values: [f64; 2]) -> Vec<u8> {
        serialize_group(&ObservationGroup {
            group_id: i,
            machine_id: 0,
            timestamp: i * 10,
            readings: vec![(0, values[0]), (1, values[1])],
        })
    }

    fn run(p: &mut Processor, values: &[f64]) -> Vec<Detection> {
        let mut out = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            p.process_message(&message(i as u64, [v, 0.0]), &mut |d| out.push(d)).unwrap();
        }
        out
    }

    #[test]
    fn k1_metadata_never_detects() {
        let config = RunConfig { window_size: 4, threshold: 1.0, ..RunConfig::default() };
        let mut p = Processor::new(&meta(1), &config, 0);
        let found = run(&mut p, &[1.0, 7.0, 3.0, 9.0, 2.0, 8.0, 1.0]);
        assert!(found.is_empty());
        assert_eq!(p.counters().k1, 4);
        assert_eq!(p.counters().windows, 4);
        assert_eq!(p.counters().messages, 7);
    }

    #[test]
    fn triggers_partition_the_windows() {
        let config = RunConfig { window_size: 4, ..RunConfig::default() };
        let mut p = Processor::new(&meta(2), &config, 0);
        run(&mut p, &[1.0, 5.0, 1.0, 9.0, 1.0, 5.0, 5.0, 5.0, 5.0, 5.0, 2.0, 3.0]);
        let c = p.counters();
        assert_eq!(c.windows, 9);
        assert_eq!(c.inout + c.k1 + c.lowk + c.full, c.windows);
        assert!(c.k1 >= 1);
    }

    #[test]
    fn cyclic_stream_reuses_clusters() {
        let config = RunConfig { window_size: 6, ..RunConfig::default() };
        let mut p = Processor::new(&meta(3), &config, 0);
        let values: Vec<f64> = (0..60).map(|i| [1.0, 4.0, 9.0][i % 3]).collect();
        run(&mut p, &values);
        let c = p.counters();
        assert_eq!(c.full, 1);
        assert_eq!(c.inout, c.windows - 1);
    }

    #[test]
    fn force_full_detects_the_same() {
        let values: Vec<f64> = (0..200u32).map(|i| f64::from((i * 7 + i / 13) % 5)).collect();
        let base = RunConfig { window_size: 8, threshold: 0.2, ..RunConfig::default() };
        let mut fast = Processor::new(&meta(3), &base, 0);
        let mut slow = Processor::new(&meta(3), &RunConfig { force_full: true, ..base }, 0);
        let a = run(&mut fast, &values);
        let b = run(&mut slow, &values);
        assert!(!a.is_empty());
        assert_eq!(a, b);
        assert_eq!(slow.counters().full, slow.counters().windows);
    }

    #[test]
    fn parse_error_is_counted() {
        let mut p = Processor::new(&meta(2), &RunConfig::default(), 0);
        let mut bad = message(0, [1.0, 2.0]);
        let n = bad.len();
        bad[n - 5] = b'X';
        assert!(p.process_message(&bad, &mut |_| {}).is_err());
        assert_eq!(p.counters().parse_errors, 1);
    }

    mod props {
        use super::*;
        use crate::clustering::{canonical_partition, kmeans_full};
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// Whatever path handled a window, the stored clustering is the
            /// baseline partition of that window.
            #[test]
            fn every_path_keeps_the_baseline_partition(
                w in 2usize..9,
                k in 1usize..5,
                values in prop::collection::vec(0u8..4, 1..80),
            ) {
                let config = RunConfig { window_size: w, ..RunConfig::default() };
                let mut p = Processor::new(&meta(k), &config, 0);
                for (i, &v) in values.iter().enumerate() {
                    p.process_message(&message(i as u64, [f64::from(v), 0.0]), &mut |_| {}).unwrap();
                    let window = p.store().lookup(SensorKey::new(0, 0)).unwrap();
                    if window.is_full() && window.has_clustering() {
                        let vals: Vec<f64> = window.values().collect();
                        let seq: Vec<u32> = window.cluster_sequence().iter().copied().collect();
                        prop_assert_eq!(
                            canonical_partition(&seq),
                            canonical_partition(&kmeans_full(&vals, k, 50).assignments)
                        );
                    }
                }
                let c = p.counters();
                prop_assert_eq!(c.inout + c.k1 + c.lowk + c.full, c.windows);
            }
        }
    }
}
