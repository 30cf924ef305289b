//! Seeded synthetic workloads.
//!
//! One group per machine per tick, machines in ascending order within a tick,
//! timestamps advancing 10 ms per tick. Identical spec and seed give a
//! byte-identical corpus.

use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Metadata, ObservationGroup, SensorKey, SensorMetadata};
use crate::wire::write_group;

/// Milliseconds between consecutive ticks.
pub const TICK_MS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum ValueModel {
    Constant(f64),
    /// `alphabet[t mod p]` at tick `t`.
    Cyclic(Vec<f64>),
    /// Uniform draw from `distinct` fixed values.
    Uniform { distinct: usize },
    /// The base model, replaced by `spike` with probability `rate`.
    Spike { base: Box<ValueModel>, spike: f64, rate: f64 },
}

impl ValueModel {
    fn sample(&self, tick: u64, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ValueModel::Constant(v) => *v,
            ValueModel::Cyclic(alphabet) => alphabet[(tick % alphabet.len() as u64) as usize],
            ValueModel::Uniform { distinct } => uniform_value(rng.gen_range(0..*distinct)),
            ValueModel::Spike { base, spike, rate } => {
                let v = base.sample(tick, rng);
                if rng.gen_bool(*rate) {
                    *spike
                } else {
                    v
                }
            }
        }
    }
}

/// The i-th value of the uniform alphabet.
pub fn uniform_value(i: usize) -> f64 {
    i as f64 * 1.25
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub model: ValueModel,
    pub clusters: usize,
    pub stateful: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub machines: u32,
    pub sensors_per_machine: u32,
    /// Ticks; every machine emits one group per tick.
    pub groups: u64,
    pub seed: u64,
    /// Row-major `[machine][sensor]`.
    pub sensors: Vec<SensorSpec>,
}

impl GeneratorSpec {
    /// Every sensor stateful with the same model and cluster count.
    pub fn uniform(
        machines: u32,
        sensors_per_machine: u32,
        groups: u64,
        model: ValueModel,
        clusters: usize,
        seed: u64,
    ) -> Self {
        let sensor = SensorSpec { model, clusters, stateful: true };
        Self {
            machines,
            sensors_per_machine,
            groups,
            seed,
            sensors: vec![sensor; (machines * sensors_per_machine) as usize],
        }
    }

    /// Random mixture of all models, K in 1..=8, about a tenth of the sensors
    /// non-stateful.
    pub fn mixed(machines: u32, sensors_per_machine: u32, groups: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F5E);
        let sensors = (0..machines * sensors_per_machine)
            .map(|_| SensorSpec {
                model: random_model(&mut rng, true),
                clusters: rng.gen_range(1..=8),
                stateful: rng.gen_bool(0.9),
            })
            .collect();
        Self { machines, sensors_per_machine, groups, seed, sensors }
    }

    pub fn sensor(&self, machine: u32, sensor: u32) -> &SensorSpec {
        &self.sensors[(machine * self.sensors_per_machine + sensor) as usize]
    }

    pub fn metadata(&self) -> Metadata {
        let mut meta = Metadata::new();
        for m in 0..self.machines {
            for s in 0..self.sensors_per_machine {
                let spec = self.sensor(m, s);
                meta.insert(
                    SensorKey::new(m, s),
                    SensorMetadata { clusters: spec.clusters, stateful: spec.stateful },
                );
            }
        }
        meta
    }
}

const GRID: [f64; 12] = [-3.5, -1.0, -0.25, 0.0, 0.5, 1.0, 2.0, 2.75, 4.0, 12.5, 1e-3, 6.02e23];

fn random_model(rng: &mut ChaCha8Rng, allow_spike: bool) -> ValueModel {
    match rng.gen_range(0..if allow_spike { 4 } else { 3 }) {
        0 => ValueModel::Constant(*GRID.choose(rng).expect("non-empty")),
        1 => {
            let p = rng.gen_range(2..=6);
            ValueModel::Cyclic((0..p).map(|_| *GRID.choose(rng).expect("non-empty")).collect())
        }
        2 => ValueModel::Uniform { distinct: rng.gen_range(2..=6) },
        _ => ValueModel::Spike {
            base: Box::new(random_model(rng, false)),
            spike: *[-250.0, 99.5, 3.25e-7, 1.5e12].choose(rng).expect("non-empty"),
            rate: rng.gen_range(0.01..0.1),
        },
    }
}

/// A generated workload.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub messages: Vec<Vec<u8>>,
    pub metadata: Metadata,
}

impl Corpus {
    /// All messages concatenated, the replay file format.
    pub fn bytes(&self) -> Vec<u8> {
        self.messages.concat()
    }

    pub fn total_bytes(&self) -> usize {
        self.messages.iter().map(Vec::len).sum()
    }

    pub fn write(&self, corpus: impl AsRef<Path>, metadata: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(corpus, self.bytes())?;
        std::fs::write(metadata, self.metadata.to_text())
    }
}

pub fn generate(spec: &GeneratorSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut messages = Vec::with_capacity((spec.groups * u64::from(spec.machines)) as usize);
    let mut group_id = 0u64;
    for tick in 0..spec.groups {
        for machine in 0..spec.machines {
            let readings = (0..spec.sensors_per_machine)
                .map(|s| (s, spec.sensor(machine, s).model.sample(tick, &mut rng)))
                .collect();
            let group = ObservationGroup {
                group_id,
                machine_id: machine,
                timestamp: tick * TICK_MS,
                readings,
            };
            let mut bytes = Vec::with_capacity(160 + 96 * spec.sensors_per_machine as usize);
            write_group(&mut bytes, &group);
            messages.push(bytes);
            group_id += 1;
        }
    }
    Corpus { messages, metadata: spec.metadata() }
}
