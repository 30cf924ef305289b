//! Brute-force reference for the whole query.
//!
//! Strict parsing, full K-means and a fresh transition count on every full
//! window, no reuse state and no shortcuts. Only the leaf functions are shared
//! with the engine.

use std::collections::{HashMap, VecDeque};

use crate::clustering::kmeans_full;
use crate::model::{Anomaly, Metadata, RunConfig, SensorKey};
use crate::modeling::{count_transitions, detect, ModelError};
use crate::wire::{parse_group_reference, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("message {index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Anomalies of `messages` in `(timestamp, machine, property)` order, with ids
/// assigned in that order. `worker_count` and the optimization switches of
/// `config` are ignored.
pub fn oracle_run<M: AsRef<[u8]>>(
    messages: &[M],
    metadata: &Metadata,
    config: &RunConfig,
) -> Result<Vec<Anomaly>, OracleError> {
    let w = config.window_size;
    let mut windows: HashMap<SensorKey, VecDeque<f64>> = HashMap::new();
    let mut found = Vec::new();
    for (index, message) in messages.iter().enumerate() {
        let group = parse_group_reference(message.as_ref())
            .map_err(|source| OracleError::Parse { index, source })?;
        for &(property, value) in &group.readings {
            let key = SensorKey::new(group.machine_id, property);
            let Some(meta) = metadata.get(key).filter(|m| m.stateful) else {
                continue;
            };
            let window = windows.entry(key).or_default();
            if window.len() == w {
                window.pop_front();
            }
            window.push_back(value);
            if window.len() < w {
                continue;
            }
            let values: Vec<f64> = window.iter().copied().collect();
            let clustering = kmeans_full(&values, meta.clusters, config.max_kmeans_iterations);
            let counts = count_transitions(&clustering.assignments);
            if let Some(probability) =
                detect(&clustering.assignments, &counts, config.transitions, config.threshold)?
            {
                found.push(Anomaly {
                    id: 0,
                    machine: group.machine_id,
                    property,
                    timestamp: group.timestamp,
                    probability,
                });
            }
        }
    }
    found.sort_by_key(|a| a.order_key());
    for (id, a) in found.iter_mut().enumerate() {
        a.id = id as u64;
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObservationGroup, SensorMetadata};
    use crate::wire::serialize_group;

    fn stream(values: &[f64], k: usize) -> (Vec<Vec<u8>>, Metadata) {
        let mut meta = Metadata::new();
        meta.insert(SensorKey::new(0, 0), SensorMetadata { clusters: k, stateful: true });
        let messages = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                serialize_group(&ObservationGroup {
                    group_id: i as u64,
                    machine_id: 0,
                    timestamp: i as u64 * 10,
                    readings: vec![(0, v)],
                })
            })
            .collect();
        (messages, meta)
    }

    #[test]
    fn constant_stream_is_quiet() {
        let (messages, meta) = stream(&[3.0; 40], 3);
        let config = RunConfig { window_size: 5, threshold: 1.0, ..RunConfig::default() };
        assert!(oracle_run(&messages, &meta, &config).unwrap().is_empty());
    }

    #[test]
    fn hand_traced_windows() {
        // W = 5, K = 2. Windows ending at i = 4..=6:
        //   [0,0,0,0,9] -> seq 0,0,0,0,1: (3/4)^3 * 1/4 = 27/256
        //   [0,0,0,9,0] -> seq 0,0,0,1,0: P(0->0)^2 = (2/3)^2, then (1/3) * 1 = 4/27
        //   [0,0,9,0,0] -> seq 0,0,1,0,0: (2/3) * (1/3) * 1 * (2/3) = 4/27
        let (messages, meta) = stream(&[0.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0], 2);
        let config = RunConfig { window_size: 5, threshold: 0.2, ..RunConfig::default() };
        let out = oracle_run(&messages, &meta, &config).unwrap();
        let probs: Vec<f64> = out.iter().map(|a| a.probability).collect();
        let a = 2.0 / 3.0;
        assert_eq!(probs, vec![27.0 / 256.0, a * a * (1.0 / 3.0) * 1.0, a * (1.0 / 3.0) * 1.0 * a]);
        assert_eq!(out.iter().map(|a| a.timestamp).collect::<Vec<_>>(), vec![40, 50, 60]);
        assert_eq!(out.iter().map(|a| a.id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn malformed_input_aborts() {
        let (mut messages, meta) = stream(&[1.0, 2.0], 2);
        messages[1][3] = b'x';
        assert!(matches!(
            oracle_run(&messages, &meta, &RunConfig::default()),
            Err(OracleError::Parse { index: 1, .. })
        ));
    }
}
