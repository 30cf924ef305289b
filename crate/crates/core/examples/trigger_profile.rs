// How often each shortcut fires on the constructed workloads.

use skipstage::commands::{profile_table, run_replay};
use skipstage::generator::{generate, uniform_value, GeneratorSpec, ValueModel};
use skipstage::pipeline::NullSink;
use skipstage::RunConfig;

fn main() {
    let cases = [
        ("constant", ValueModel::Constant(1.0), 3, 10),
        ("cyclic p=3, K=3, W=9", ValueModel::Cyclic((0..3).map(uniform_value).collect()), 3, 9),
        ("uniform D=2, K=5", ValueModel::Uniform { distinct: 2 }, 5, 10),
        ("uniform D=6, K=3", ValueModel::Uniform { distinct: 6 }, 3, 10),
    ];
    for (name, model, clusters, window) in cases {
        let corpus = generate(&GeneratorSpec::uniform(5, 5, 400, model, clusters, 1));
        let config = RunConfig { window_size: window, ..RunConfig::default() };
        let report = run_replay(&corpus.bytes(), &corpus.metadata, &config, NullSink::default())
            .expect("valid config");
        println!("{name}\n{}", profile_table(&report));
    }
}
