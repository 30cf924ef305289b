//! Domain types shared by every stage: sensor keys, observation groups,
//! per-sensor metadata, the run configuration and emitted anomalies.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead};
use std::time::Duration;

use thiserror::Error;

/// Identifies one sensor stream: `(machine, property)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensorKey {
    pub machine: u32,
    pub property: u32,
}

impl SensorKey {
    pub fn new(machine: u32, property: u32) -> Self {
        Self { machine, property }
    }
}

impl fmt::Display for SensorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.machine, self.property)
    }
}

/// One timestamped message carrying every reading of a single machine.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGroup {
    pub group_id: u64,
    pub machine_id: u32,
    /// Logical milliseconds.
    pub timestamp: u64,
    /// Sorted strictly ascending by property id.
    pub readings: Vec<(u32, f64)>,
}

impl ObservationGroup {
    /// True when readings are strictly ascending by property id and every value is finite.
    pub fn is_well_formed(&self) -> bool {
        self.readings.windows(2).all(|p| p[0].0 < p[1].0)
            && self.readings.iter().all(|(_, v)| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorMetadata {
    /// K, the number of clusters for the sensor's windows.
    pub clusters: usize,
    /// Non-stateful sensors are parsed but never processed.
    pub stateful: bool,
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("metadata line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("metadata line {line}: sensor {key} defined twice")]
    Duplicate { line: usize, key: SensorKey },
    #[error("metadata line {line}: sensor {key} has cluster count 0")]
    Domain { line: usize, key: SensorKey },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Per-sensor metadata for every known `(machine, property)` pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    sensors: BTreeMap<SensorKey, SensorMetadata>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces an entry. Panics if `clusters` is zero.
    pub fn insert(&mut self, key: SensorKey, meta: SensorMetadata) {
        assert!(meta.clusters >= 1, "cluster count must be at least 1");
        self.sensors.insert(key, meta);
    }

    pub fn get(&self, key: SensorKey) -> Option<&SensorMetadata> {
        self.sensors.get(&key)
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SensorKey, SensorMetadata)> + '_ {
        self.sensors.iter().map(|(k, m)| (*k, *m))
    }

    /// One past the highest machine id present.
    pub fn machine_count(&self) -> usize {
        self.sensors
            .keys()
            .map(|k| k.machine as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// One past the highest property id of `machine`, or 0 when unknown.
    pub fn property_count(&self, machine: u32) -> usize {
        self.sensors
            .range(SensorKey::new(machine, 0)..=SensorKey::new(machine, u32::MAX))
            .map(|(k, _)| k.property as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// Stateful sensors of `machine`, ascending by property id.
    pub fn stateful_sensors(&self, machine: u32) -> impl Iterator<Item = (u32, SensorMetadata)> + '_ {
        self.sensors
            .range(SensorKey::new(machine, 0)..=SensorKey::new(machine, u32::MAX))
            .filter(|(_, m)| m.stateful)
            .map(|(k, m)| (k.property, *m))
    }

    /// Parses the `machine,sensor,clusters,stateful` text format.
    pub fn load<R: BufRead>(source: R) -> Result<Self, MetadataError> {
        let mut out = Metadata::new();
        for (idx, line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(MetadataError::Parse {
                    line: line_no,
                    reason: format!("expected 4 comma-separated fields, found {}", fields.len()),
                });
            }
            let number = |i: usize, name: &str| -> Result<u64, MetadataError> {
                fields[i].parse::<u64>().map_err(|_| MetadataError::Parse {
                    line: line_no,
                    reason: format!("{name} {:?} is not a non-negative integer", fields[i]),
                })
            };
            let machine = number(0, "machine id")?;
            let property = number(1, "sensor id")?;
            let clusters = number(2, "cluster count")?;
            let (machine, property) = match (u32::try_from(machine), u32::try_from(property)) {
                (Ok(m), Ok(p)) => (m, p),
                _ => {
                    return Err(MetadataError::Parse {
                        line: line_no,
                        reason: "id out of range".into(),
                    })
                }
            };
            let stateful = match fields[3] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(MetadataError::Parse {
                        line: line_no,
                        reason: format!("stateful flag must be 0 or 1, found {other:?}"),
                    })
                }
            };
            let key = SensorKey::new(machine, property);
            if clusters == 0 {
                return Err(MetadataError::Domain { line: line_no, key });
            }
            if out.sensors.contains_key(&key) {
                return Err(MetadataError::Duplicate { line: line_no, key });
            }
            out.sensors.insert(
                key,
                SensorMetadata {
                    clusters: clusters as usize,
                    stateful,
                },
            );
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# machine,sensor,clusters,stateful\n");
        for (k, m) in &self.sensors {
            s.push_str(&format!(
                "{},{},{},{}\n",
                k.machine,
                k.property,
                m.clusters,
                u8::from(m.stateful)
            ));
        }
        s
    }
}

/// Parses metadata text.
pub fn load_metadata<R: BufRead>(source: R) -> Result<Metadata, MetadataError> {
    Metadata::load(source)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("window size must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("transition count must be at least 1")]
    NoTransitions,
    #[error("threshold must lie in (0, 1], got {0}")]
    ThresholdOutOfRange(f64),
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("max k-means iterations must be at least 1")]
    NoIterations,
    #[error("worker queue capacity must be at least 1")]
    NoQueueCapacity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// W, values per sliding window.
    pub window_size: usize,
    /// N, how many trailing transitions compose the anomaly probability.
    pub transitions: usize,
    /// T, anomalies are emitted when the composed probability is strictly below it.
    pub threshold: f64,
    pub max_kmeans_iterations: usize,
    pub worker_count: usize,
    pub warmup_groups: usize,
    pub warmup_passes: usize,
    /// Order output through the pre-exit queue and watermark.
    pub synchronized_output: bool,
    /// Disable IN/OUT, K1 and LowK; every full window runs baseline K-means.
    pub force_full: bool,
    /// Idle workers report the maximum timestamp instead of the dispatcher clock.
    pub compat_sentinel_watermark: bool,
    /// Bound of each worker's inbound queue.
    pub queue_capacity: usize,
    pub flush_interval: Duration,
    /// Use the sorted-sweep K-means for full clustering passes.
    #[cfg(feature = "sorted-sweep")]
    pub sorted_sweep: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window_size: 10,
            transitions: 5,
            threshold: 0.005,
            max_kmeans_iterations: 50,
            worker_count: 1,
            warmup_groups: 5000,
            warmup_passes: 3,
            synchronized_output: true,
            force_full: false,
            compat_sentinel_watermark: false,
            queue_capacity: 1024,
            flush_interval: Duration::from_millis(1),
            #[cfg(feature = "sorted-sweep")]
            sorted_sweep: false,
        }
    }
}

impl RunConfig {
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.window_size < 2 {
            return Err(ConfigError::WindowTooSmall(self.window_size));
        }
        if self.transitions < 1 {
            return Err(ConfigError::NoTransitions);
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(ConfigError::ThresholdOutOfRange(self.threshold));
        }
        if self.worker_count < 1 {
            return Err(ConfigError::NoWorkers);
        }
        if self.max_kmeans_iterations < 1 {
            return Err(ConfigError::NoIterations);
        }
        if self.queue_capacity < 1 {
            return Err(ConfigError::NoQueueCapacity);
        }
        Ok(self)
    }

    pub(crate) fn sorted_sweep_enabled(&self) -> bool {
        #[cfg(feature = "sorted-sweep")]
        {
            self.sorted_sweep
        }
        #[cfg(not(feature = "sorted-sweep"))]
        {
            false
        }
    }
}

pub fn validate_config(cfg: RunConfig) -> Result<RunConfig, ConfigError> {
    cfg.validate()
}

/// A detected low-probability transition sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anomaly {
    /// Emission sequence number, from 0.
    pub id: u64,
    pub machine: u32,
    pub property: u32,
    /// Timestamp of the group whose arrival completed the detecting window.
    pub timestamp: u64,
    pub probability: f64,
}

impl Anomaly {
    /// `(timestamp, machine, property)`, the global output order.
    pub fn order_key(&self) -> (u64, u32, u32) {
        (self.timestamp, self.machine, self.property)
    }

    /// Tab-separated output line, without the trailing newline.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.id,
            self.machine,
            self.property,
            self.timestamp,
            format_significant(self.probability, 12)
        )
    }
}

/// Formats like C's `%.{digits}g`: shortest of fixed/scientific, trailing zeros trimmed.
pub fn format_significant(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
