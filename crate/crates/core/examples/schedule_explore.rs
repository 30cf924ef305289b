// The engine's components driven by an explicit scheduler: enumerate
// interleavings and check every output against the oracle. The sentinel
// watermark lets a starved worker's anomaly slip out of order.

use skipstage::oracle::oracle_run;
use skipstage::pipeline::stepped::{explore_exhaustive, explore_random, Actor, SteppedEngine};
use skipstage::wire::serialize_group;
use skipstage::{Metadata, ObservationGroup, RunConfig, SensorKey, SensorMetadata};

fn main() {
    let mut meta = Metadata::new();
    let mut messages = Vec::new();
    for m in 0..4 {
        meta.insert(SensorKey::new(m, 0), SensorMetadata { clusters: 2, stateful: true });
    }
    for tick in 0..6u64 {
        for m in 0..4u32 {
            messages.push(serialize_group(&ObservationGroup {
                group_id: tick * 4 + u64::from(m),
                machine_id: m,
                timestamp: tick * 10 + u64::from(m / 2) * 3,
                readings: vec![(0, if (tick + u64::from(m)) % 3 == 2 { 5.0 } else { 1.0 })],
            }));
        }
    }
    let config = RunConfig { window_size: 3, threshold: 1.0, worker_count: 2, ..RunConfig::default() };
    let expected = oracle_run(&messages, &meta, &config).expect("well-formed");

    let dfs = explore_exhaustive(&messages, &meta, &config, &expected, 2_000).expect("valid config");
    let random = explore_random(&messages, &meta, &config, &expected, 2_000, 1).expect("valid config");
    println!("enumerated: {dfs:?}\nrandom:     {random:?}");

    let starve = |enabled: &[Actor]| enabled.iter().position(|a| *a != Actor::Worker(0)).unwrap_or(0);
    let compat = RunConfig { compat_sentinel_watermark: true, ..config };
    let out = SteppedEngine::new(&messages, &meta, &compat).expect("valid config").run_schedule(starve);
    let keys: Vec<u64> = out.iter().map(|a| a.timestamp).collect();
    println!("sentinel watermark, worker 0 starved: timestamps {keys:?}");
}
