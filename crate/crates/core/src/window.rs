//! Per-sensor sliding windows and the double-indexed store that holds them.
//!
//! Besides the values, each window carries the state that lets later windows
//! reuse earlier work: the evicted value, the multiplicities of the
//! first-K-distinct prefix and its frontier, the last cluster sequence and its
//! transition counts.

use std::collections::{HashMap, VecDeque};

use ordered_float::OrderedFloat;

use crate::clustering::sweep::SortedMultiset;
use crate::model::{Metadata, SensorKey};
use crate::modeling::TransitionCounts;

/// Value identity used for distinctness. `-0.0` and `0.0` compare equal.
pub type ValueKey = OrderedFloat<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorWindow {
    capacity: usize,
    clusters: usize,
    pub(crate) values: VecDeque<f64>,
    pub(crate) prev_first: Option<f64>,
    /// Multiplicities over `values[0..position + 1)` once primed: the prefix
    /// ending at the first occurrence of the K-th distinct value, or the whole
    /// window when fewer than K distinct values exist.
    pub(crate) frequencies: HashMap<ValueKey, u32>,
    /// One-past end of the tracked prefix, stored in the coordinates of the
    /// next window (i.e. minus one).
    pub(crate) position: usize,
    pub(crate) primed: bool,
    pub(crate) cluster_sequence: VecDeque<u32>,
    pub(crate) counts: TransitionCounts,
    pub(crate) centroids: Vec<f64>,
    /// Whether `cluster_sequence` and `counts` describe the current window.
    pub(crate) sequence_valid: bool,
    /// Multiplicity of every value in the whole window.
    pub(crate) multiplicity: HashMap<ValueKey, u32>,
    pub(crate) sorted: Option<SortedMultiset>,
}

impl SensorWindow {
    pub fn new(capacity: usize, clusters: usize) -> Self {
        assert!(capacity >= 1 && clusters >= 1);
        Self {
            capacity,
            clusters,
            values: VecDeque::with_capacity(capacity),
            prev_first: None,
            frequencies: HashMap::new(),
            position: 0,
            primed: false,
            cluster_sequence: VecDeque::with_capacity(capacity),
            counts: TransitionCounts::default(),
            centroids: Vec::new(),
            sequence_valid: false,
            multiplicity: HashMap::new(),
            sorted: None,
        }
    }

    /// Also maintains an ordered multiset of the window for the sorted sweep.
    pub fn with_sorted_view(mut self) -> Self {
        self.sorted = Some(SortedMultiset::from_values(self.values.iter().copied()));
        self
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.capacity
    }

    /// Appends `value`, evicting the oldest one when the window is full.
    pub fn slide(&mut self, value: f64) -> Option<f64> {
        let evicted = if self.values.len() == self.capacity {
            let old = self.values.pop_front().expect("full window");
            self.prev_first = Some(old);
            let key = OrderedFloat(old);
            if let Some(n) = self.multiplicity.get_mut(&key) {
                *n -= 1;
                if *n == 0 {
                    self.multiplicity.remove(&key);
                }
            }
            if let Some(sorted) = &mut self.sorted {
                sorted.remove(old);
            }
            Some(old)
        } else {
            None
        };
        self.values.push_back(value);
        *self.multiplicity.entry(OrderedFloat(value)).or_insert(0) += 1;
        if let Some(sorted) = &mut self.sorted {
            sorted.insert(value);
        }
        evicted
    }

    pub fn values(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn last(&self) -> Option<f64> {
        self.values.back().copied()
    }

    /// Window values as one slice, in logical order.
    pub fn contiguous(&mut self) -> &[f64] {
        self.values.make_contiguous()
    }

    pub fn prev_first(&self) -> Option<f64> {
        self.prev_first
    }

    pub fn frequencies(&self) -> &HashMap<ValueKey, u32> {
        &self.frequencies
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn is_primed(&self) -> bool {
        self.primed
    }

    pub fn distinct_count(&self) -> usize {
        self.multiplicity.len()
    }

    pub fn cluster_sequence(&self) -> &VecDeque<u32> {
        &self.cluster_sequence
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn sorted_view(&self) -> Option<&SortedMultiset> {
        self.sorted.as_ref()
    }

    /// Initializes the prefix state by a linear scan of the current window.
    pub fn prime(&mut self) {
        self.frequencies.clear();
        let mut end = self.values.len();
        for (i, &v) in self.values.iter().enumerate() {
            let count = self.frequencies.entry(OrderedFloat(v)).or_insert(0);
            *count += 1;
            if *count == 1 && self.frequencies.len() == self.clusters {
                end = i + 1;
                break;
            }
        }
        self.position = end.saturating_sub(1);
        self.primed = true;
    }

    /// Rotates the cluster sequence left by one; the old head becomes the tail.
    pub(crate) fn rotate_sequence(&mut self) {
        if let Some(head) = self.cluster_sequence.pop_front() {
            self.cluster_sequence.push_back(head);
        }
    }

    /// Stores the clustering of the current window for later reuse.
    pub fn install(&mut self, centroids: Vec<f64>, assignments: &[u32]) {
        self.centroids = centroids;
        self.cluster_sequence.clear();
        self.cluster_sequence.extend(assignments.iter().copied());
        self.sequence_valid = true;
    }

    /// Marks the stored clustering as not describing the current window.
    pub(crate) fn invalidate(&mut self) {
        self.sequence_valid = false;
    }

    pub fn has_clustering(&self) -> bool {
        self.sequence_valid
    }

    /// Back to the freshly constructed state.
    pub fn reset(&mut self) {
        let sorted = self.sorted.is_some();
        *self = SensorWindow::new(self.capacity, self.clusters);
        if sorted {
            self.sorted = Some(SortedMultiset::default());
        }
    }
}

pub fn slide(window: &mut SensorWindow, value: f64) -> Option<f64> {
    window.slide(value)
}

pub fn is_full(window: &SensorWindow) -> bool {
    window.is_full()
}

/// Windows indexed `[machine][property]`; only stateful sensors have one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowStore {
    rows: Vec<Vec<Option<SensorWindow>>>,
}

impl WindowStore {
    pub fn new(metadata: &Metadata, window_size: usize) -> Self {
        Self::build(metadata, window_size, false, |_| true)
    }

    /// Store holding only the machines routed to `worker`.
    pub fn for_worker(
        metadata: &Metadata,
        window_size: usize,
        sorted_view: bool,
        worker: usize,
        workers: usize,
    ) -> Self {
        Self::build(metadata, window_size, sorted_view, |m| {
            crate::pipeline::route(m, workers) == worker
        })
    }

    fn build(
        metadata: &Metadata,
        window_size: usize,
        sorted_view: bool,
        owns: impl Fn(u32) -> bool,
    ) -> Self {
        let mut rows: Vec<Vec<Option<SensorWindow>>> = vec![Vec::new(); metadata.machine_count()];
        for (machine, row) in rows.iter_mut().enumerate() {
            let machine = machine as u32;
            if !owns(machine) {
                continue;
            }
            row.resize_with(metadata.property_count(machine), || None);
            for (property, meta) in metadata.stateful_sensors(machine) {
                let w = SensorWindow::new(window_size, meta.clusters);
                row[property as usize] = Some(if sorted_view { w.with_sorted_view() } else { w });
            }
        }
        Self { rows }
    }

    pub fn lookup(&self, key: SensorKey) -> Option<&SensorWindow> {
        self.rows
            .get(key.machine as usize)?
            .get(key.property as usize)?
            .as_ref()
    }

    pub fn lookup_mut(&mut self, key: SensorKey) -> Option<&mut SensorWindow> {
        self.rows
            .get_mut(key.machine as usize)?
            .get_mut(key.property as usize)?
            .as_mut()
    }

    pub fn windows(&self) -> impl Iterator<Item = (SensorKey, &SensorWindow)> {
        self.rows.iter().enumerate().flat_map(|(m, row)| {
            row.iter().enumerate().filter_map(move |(p, w)| {
                w.as_ref().map(|w| (SensorKey::new(m as u32, p as u32), w))
            })
        })
    }

    pub fn len(&self) -> usize {
        self.windows().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reset(&mut self) {
        for w in self.rows.iter_mut().flatten().flatten() {
            w.reset();
        }
    }
}

pub fn lookup(store: &WindowStore, key: SensorKey) -> Option<&SensorWindow> {
    store.lookup(key)
}
