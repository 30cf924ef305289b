// Differential check: engine output against the brute-force oracle, as text.

use skipstage::generator::{generate, GeneratorSpec};
use skipstage::oracle::oracle_run;
use skipstage::pipeline::{run, write_anomalies, MemorySource};
use skipstage::RunConfig;

fn main() {
    for seed in 0..5 {
        let corpus = generate(&GeneratorSpec::mixed(6, 6, 400, seed));
        let config = RunConfig { worker_count: 3, ..RunConfig::default() };
        let mut engine = Vec::new();
        run(MemorySource::new(&corpus.messages), &mut engine, &corpus.metadata, config.clone())
            .expect("valid config");
        let oracle = oracle_run(&corpus.messages, &corpus.metadata, &config).expect("well-formed corpus");

        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_anomalies(&mut a, &engine).expect("in memory");
        write_anomalies(&mut b, &oracle).expect("in memory");
        println!("seed {seed}: {} anomalies, identical: {}", oracle.len(), a == b);
        assert_eq!(a, b);
    }
}
