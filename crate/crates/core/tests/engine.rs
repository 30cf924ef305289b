use proptest::prelude::*;

use skipstage::generator::{generate, GeneratorSpec, ValueModel};
use skipstage::oracle::oracle_run;
use skipstage::pipeline::{run, MemorySource, NullSink};
use skipstage::wire::serialize_group;
use skipstage::{Anomaly, Engine, Metadata, ObservationGroup, RunConfig, SensorKey, SensorMetadata};

fn engine_output(messages: &[Vec<u8>], meta: &Metadata, config: &RunConfig) -> Vec<Anomaly> {
    let mut out = Vec::new();
    run(MemorySource::new(messages), &mut out, meta, config.clone()).unwrap();
    out
}

fn sorted(anomalies: &[Anomaly]) -> bool {
    anomalies.windows(2).all(|p| p[0].order_key() <= p[1].order_key())
}

#[test]
fn twelve_workers_emit_in_order() {
    let corpus = generate(&GeneratorSpec::mixed(24, 6, 400, 12));
    let config = RunConfig { window_size: 10, worker_count: 12, ..RunConfig::default() };
    let out = engine_output(&corpus.messages, &corpus.metadata, &config);
    assert!(out.len() > 50);
    assert!(sorted(&out));
    assert!(out.iter().enumerate().all(|(i, a)| a.id == i as u64));
    assert_eq!(out, oracle_run(&corpus.messages, &corpus.metadata, &config).unwrap());
}

#[test]
fn single_worker_sync_and_direct_agree() {
    let corpus = generate(&GeneratorSpec::mixed(5, 5, 300, 4));
    let config = RunConfig { worker_count: 1, ..RunConfig::default() };
    let direct = RunConfig { synchronized_output: false, ..config.clone() };
    let out = engine_output(&corpus.messages, &corpus.metadata, &config);
    assert!(!out.is_empty());
    assert_eq!(engine_output(&corpus.messages, &corpus.metadata, &direct), out);
}

#[test]
fn direct_output_holds_the_same_anomalies() {
    let corpus = generate(&GeneratorSpec::mixed(8, 5, 300, 5));
    let config = RunConfig { worker_count: 3, synchronized_output: false, ..RunConfig::default() };
    let mut out = engine_output(&corpus.messages, &corpus.metadata, &config);
    out.sort_by_key(|a| a.order_key());
    for (i, a) in out.iter_mut().enumerate() {
        a.id = i as u64;
    }
    assert_eq!(out, oracle_run(&corpus.messages, &corpus.metadata, &config).unwrap());
}

#[test]
fn warmup_leaves_fresh_state() {
    let corpus = generate(&GeneratorSpec::mixed(4, 4, 200, 1));
    let config = RunConfig { worker_count: 3, ..RunConfig::default() };
    let fresh = Engine::new(&corpus.metadata, config.clone()).unwrap();
    let mut warmed = fresh.clone();
    let prefix: Vec<&[u8]> = corpus.messages.iter().take(500).map(Vec::as_slice).collect();
    warmed.warmup(&prefix, 3);
    assert!(warmed == fresh);

    let mut out = Vec::new();
    warmed.run(MemorySource::new(&corpus.messages), &mut out).unwrap();
    assert_eq!(out, oracle_run(&corpus.messages, &corpus.metadata, &config).unwrap());
}

#[test]
fn constant_corpus_is_all_k1_and_quiet() {
    let spec = GeneratorSpec::uniform(3, 4, 100, ValueModel::Constant(7.0), 4, 0);
    let corpus = generate(&spec);
    let mut out = Vec::new();
    let report = run(MemorySource::new(&corpus.messages), &mut out, &corpus.metadata, RunConfig::default()).unwrap();
    assert!(out.is_empty());
    assert_eq!(report.k1, report.windows);
    assert_eq!(report.windows, 3 * 4 * (100 - 9));
    assert_eq!(report.mean_latency_ms, None);
}

#[test]
fn non_stateful_machine_only_moves_the_clock() {
    let mut meta = Metadata::new();
    meta.insert(SensorKey::new(0, 0), SensorMetadata { clusters: 2, stateful: true });
    meta.insert(SensorKey::new(1, 0), SensorMetadata { clusters: 2, stateful: false });
    let values = [0.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0];
    let mut messages = Vec::new();
    for (i, v) in values.iter().enumerate() {
        for machine in 0..2 {
            messages.push(serialize_group(&ObservationGroup {
                group_id: (2 * i + machine) as u64,
                machine_id: machine as u32,
                timestamp: i as u64 * 10,
                readings: vec![(0, *v)],
            }));
        }
    }
    let config = RunConfig { window_size: 5, threshold: 0.2, worker_count: 2, ..RunConfig::default() };
    let mut out = Vec::new();
    let report = run(MemorySource::new(&messages), &mut out, &meta, config).unwrap();
    assert_eq!(report.messages, 14);
    assert_eq!(report.windows, 3);
    let lines: Vec<String> = out.iter().map(Anomaly::to_line).collect();
    assert_eq!(lines, ["0\t0\t0\t40\t0.10546875", "1\t0\t0\t50\t0.148148148148", "2\t0\t0\t60\t0.148148148148"]);
}

#[test]
fn trigger_counters_cover_every_window() {
    let corpus = generate(&GeneratorSpec::mixed(6, 8, 300, 77));
    let report = run(
        MemorySource::new(&corpus.messages),
        NullSink::default(),
        &corpus.metadata,
        RunConfig { worker_count: 4, ..RunConfig::default() },
    )
    .unwrap();
    assert_eq!(report.inout + report.k1 + report.lowk + report.full, report.windows);
    assert!(report.inout > 0 && report.k1 > 0 && report.lowk > 0 && report.full > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_matches_oracle_for_any_worker_count(
        seed in any::<u64>(),
        workers in 1usize..7,
        window in 2usize..12,
        transitions in 1usize..7,
    ) {
        let corpus = generate(&GeneratorSpec::mixed(7, 4, 120, seed));
        let config = RunConfig {
            window_size: window,
            transitions,
            threshold: 0.05,
            worker_count: workers,
            ..RunConfig::default()
        };
        let out = engine_output(&corpus.messages, &corpus.metadata, &config);
        prop_assert!(sorted(&out));
        let single = RunConfig { worker_count: 1, ..config.clone() };
        let oracle = oracle_run(&corpus.messages, &corpus.metadata, &config).unwrap();
        prop_assert_eq!(&oracle, &oracle_run(&corpus.messages, &corpus.metadata, &single).unwrap());
        prop_assert_eq!(out, oracle);
    }
}
