// Throughput with and without the shortcuts on an IN/OUT-heavy workload.
// Pass a tick count to scale the corpus.

use skipstage::commands::bench;
use skipstage::generator::{generate, uniform_value, GeneratorSpec, ValueModel};
use skipstage::RunConfig;

fn main() {
    let ticks: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(400);
    let model = ValueModel::Cyclic((0..4).map(uniform_value).collect());
    let corpus = generate(&GeneratorSpec::uniform(10, 10, ticks, model, 4, 0));
    let data = corpus.bytes();
    let config = RunConfig { window_size: 100, warmup_groups: 1000, ..RunConfig::default() };
    for (name, config) in [("optimized", config.clone()), ("force-full", RunConfig { force_full: true, ..config })] {
        let summary = bench(&data, &corpus.metadata, &config, 3).expect("valid config");
        println!("{name:>10}: median {:.2} MB/s over {} bytes", summary.median_throughput(), data.len());
    }
}
