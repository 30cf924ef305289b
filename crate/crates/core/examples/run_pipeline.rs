// The concurrent engine on a generated workload: anomalies come out in
// (timestamp, machine, property) order whatever the worker count.

use skipstage::generator::{generate, GeneratorSpec};
use skipstage::pipeline::{run, MemorySource};
use skipstage::RunConfig;

fn main() {
    let workers: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let corpus = generate(&GeneratorSpec::mixed(8, 6, 500, 42));
    let config = RunConfig { worker_count: workers, window_size: 10, ..RunConfig::default() };
    let mut anomalies = Vec::new();
    let report = run(MemorySource::new(&corpus.messages), &mut anomalies, &corpus.metadata, config)
        .expect("valid config");
    for a in anomalies.iter().take(10) {
        println!("{}", a.to_line());
    }
    println!("...\n{report}");
    assert!(anomalies.windows(2).all(|p| p[0].order_key() <= p[1].order_key()));
}
