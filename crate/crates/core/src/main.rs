use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use skipstage::commands::{self, CommandError};
use skipstage::generator::{generate, uniform_value, GeneratorSpec, ValueModel};
use skipstage::pipeline::{NullSink, TextSink};
use skipstage::RunConfig;

#[derive(Parser)]
#[command(name = "skipstage", version, about = "Sliding-window K-means / Markov anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engine and write anomalies.
    Run(Common),
    /// Print trigger frequencies of the clustering shortcuts.
    Profile(Common),
    /// Repeated timed runs: throughput and latency.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
    /// Write a synthetic corpus and its metadata.
    Generate(GenerateArgs),
    /// Brute-force reference run.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    transitions: usize,
    #[arg(long, default_value_t = 0.005)]
    threshold: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long = "max-iters", default_value_t = 50)]
    max_iters: usize,
    /// Order output through the watermark (default).
    #[arg(long, overrides_with = "no_sync")]
    sync: bool,
    /// Emit anomalies as soon as workers detect them.
    #[arg(long = "no-sync")]
    no_sync: bool,
    /// Disable IN/OUT, K1 and LowK.
    #[arg(long = "force-full")]
    force_full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "warmup-groups", default_value_t = 5000)]
    warmup_groups: usize,
    #[arg(long = "warmup-passes", default_value_t = 3)]
    warmup_passes: usize,
    /// Idle workers report the maximum timestamp instead of the dispatcher clock.
    #[arg(long = "compat-sentinel-watermark")]
    compat_sentinel_watermark: bool,
    #[arg(long = "queue-capacity", default_value_t = 1024)]
    queue_capacity: usize,
    #[arg(long = "flush-interval-us", default_value_t = 1000)]
    flush_interval_us: u64,
    /// Use the sorted-sweep K-means (requires the `sorted-sweep` feature).
    #[arg(long = "sorted-sweep")]
    sorted_sweep: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig, CommandError> {
        #[cfg(not(feature = "sorted-sweep"))]
        if self.sorted_sweep {
            eprintln!("warning: built without the sorted-sweep feature; flag ignored");
        }
        let config = RunConfig {
            window_size: self.window,
            transitions: self.transitions,
            threshold: self.threshold,
            max_kmeans_iterations: self.max_iters,
            worker_count: self.workers,
            warmup_groups: self.warmup_groups,
            warmup_passes: self.warmup_passes,
            synchronized_output: !self.no_sync,
            force_full: self.force_full,
            compat_sentinel_watermark: self.compat_sentinel_watermark,
            queue_capacity: self.queue_capacity,
            flush_interval: Duration::from_micros(self.flush_interval_us),
            #[cfg(feature = "sorted-sweep")]
            sorted_sweep: self.sorted_sweep,
        };
        Ok(config.validate()?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Constant,
    Cyclic,
    Uniform,
    Spike,
    Mixed,
}

#[derive(Args)]
struct GenerateArgs {
    /// Corpus file to write.
    #[arg(long)]
    output: PathBuf,
    /// Metadata file to write.
    #[arg(long)]
    meta: PathBuf,
    #[arg(long, default_value_t = 10)]
    machines: u32,
    #[arg(long, default_value_t = 10)]
    sensors: u32,
    /// Ticks; each machine emits one group per tick.
    #[arg(long, default_value_t = 2000)]
    groups: u64,
    #[arg(long, value_enum, default_value_t = ModelKind::Mixed)]
    model: ModelKind,
    #[arg(long, default_value_t = 1.0)]
    value: f64,
    #[arg(long, default_value_t = 3)]
    period: usize,
    #[arg(long, default_value_t = 2)]
    distinct: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long = "spike-rate", default_value_t = 0.02)]
    spike_rate: f64,
    #[arg(long = "spike-value", default_value_t = 100.0)]
    spike_value: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GenerateArgs {
    fn spec(&self) -> GeneratorSpec {
        let cyclic = || ValueModel::Cyclic((0..self.period.max(1)).map(uniform_value).collect());
        let model = match self.model {
            ModelKind::Mixed => {
                return GeneratorSpec::mixed(self.machines, self.sensors, self.groups, self.seed)
            }
            ModelKind::Constant => ValueModel::Constant(self.value),
            ModelKind::Cyclic => cyclic(),
            ModelKind::Uniform => ValueModel::Uniform { distinct: self.distinct.max(1) },
            ModelKind::Spike => ValueModel::Spike {
                base: Box::new(cyclic()),
                spike: self.spike_value,
                rate: self.spike_rate,
            },
        };
        GeneratorSpec::uniform(self.machines, self.sensors, self.groups, model, self.clusters, self.seed)
    }
}

fn execute(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Run(c) => {
            let config = c.config()?;
            let inputs = commands::load_inputs(&c.input, &c.meta)?;
            let report = match &c.output {
                Some(path) => {
                    let sink = TextSink::new(commands::create_output(path)?);
                    commands::run_replay(&inputs.data, &inputs.metadata, &config, sink)?
                }
                None => {
                    let sink = TextSink::new(std::io::BufWriter::new(std::io::stdout()));
                    commands::run_replay(&inputs.data, &inputs.metadata, &config, sink)?
                }
            };
            eprintln!("{report}");
        }
        Command::Profile(c) => {
            let config = c.config()?;
            let inputs = commands::load_inputs(&c.input, &c.meta)?;
            let report =
                commands::run_replay(&inputs.data, &inputs.metadata, &config, NullSink::default())?;
            print!("{}", commands::profile_table(&report));
        }
        Command::Bench { common: c, runs } => {
            let config = c.config()?;
            let inputs = commands::load_inputs(&c.input, &c.meta)?;
            let summary = commands::bench(&inputs.data, &inputs.metadata, &config, runs.max(1))?;
            for (i, r) in summary.runs.iter().enumerate() {
                println!("run={i} throughput_mb_s={:.3} wall_ms={:.3}", r.throughput_mb_s(), r.wall_ms);
            }
            println!("{}", summary.report());
        }
        Command::Generate(g) => {
            let corpus = generate(&g.spec());
            corpus.write(&g.output, &g.meta).map_err(|source| CommandError::Io {
                path: g.output.display().to_string(),
                source,
            })?;
            println!("messages={}\nbytes={}", corpus.messages.len(), corpus.total_bytes());
        }
        Command::Oracle(c) => {
            let config = c.config()?;
            let inputs = commands::load_inputs(&c.input, &c.meta)?;
            let anomalies = commands::oracle_replay(&inputs.data, &inputs.metadata, &config)?;
            match &c.output {
                Some(path) => commands::write_lines(commands::create_output(path)?, &anomalies)?,
                None => commands::write_lines(std::io::stdout().lock(), &anomalies)?,
            }
            eprintln!("anomalies={}", anomalies.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
