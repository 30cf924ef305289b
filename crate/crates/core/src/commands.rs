//! What the command-line subcommands do, as library functions.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::{Anomaly, ConfigError, Metadata, MetadataError, RunConfig};
use crate::oracle::{oracle_run, OracleError};
use crate::pipeline::{AnomalySink, Engine, NullSink, RunError, RunReport};
use crate::wire::frames;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("metadata: {0}")]
    Metadata(#[from] MetadataError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CommandError + '_ {
    move |source| CommandError::Io { path: path.display().to_string(), source }
}

/// Replay corpus and metadata loaded into memory.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub data: Vec<u8>,
    pub metadata: Metadata,
}

pub fn load_inputs(input: &Path, meta: &Path) -> Result<Inputs, CommandError> {
    let data = std::fs::read(input).map_err(io_error(input))?;
    let file = File::open(meta).map_err(io_error(meta))?;
    let metadata = Metadata::load(BufReader::new(file))?;
    Ok(Inputs { data, metadata })
}

/// Creates `path` and wraps it in a buffered writer.
pub fn create_output(path: &Path) -> Result<BufWriter<File>, CommandError> {
    Ok(BufWriter::new(File::create(path).map_err(io_error(path))?))
}

/// Warms up on the corpus prefix, then runs the engine over the whole corpus.
pub fn run_replay<S: AnomalySink + Send>(
    data: &[u8],
    metadata: &Metadata,
    config: &RunConfig,
    sink: S,
) -> Result<RunReport, CommandError> {
    let mut engine = Engine::new(metadata, config.clone())?;
    if config.warmup_passes > 0 && config.warmup_groups > 0 {
        let prefix: Vec<&[u8]> = frames(data).take(config.warmup_groups).collect();
        engine.warmup(&prefix, config.warmup_passes);
    }
    Ok(engine.run(frames(data), sink)?)
}

/// Oracle anomalies for a replay corpus.
pub fn oracle_replay(
    data: &[u8],
    metadata: &Metadata,
    config: &RunConfig,
) -> Result<Vec<Anomaly>, CommandError> {
    let config = config.clone().validate()?;
    let messages: Vec<&[u8]> = frames(data).collect();
    Ok(oracle_run(&messages, metadata, &config)?)
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Trigger frequencies over the full windows of a run.
pub fn profile_table(report: &RunReport) -> String {
    let w = report.windows;
    let mut out = String::new();
    out.push_str(&format!(
        "{:>12} {:>9} {:>9} {:>9} {:>9}\n",
        "windows", "IN/OUT", "K1", "LowK", "FULL"
    ));
    out.push_str(&format!(
        "{:>12} {:>8.2}% {:>8.2}% {:>8.2}% {:>8.2}%\n",
        w,
        percent(report.inout, w),
        percent(report.k1, w),
        percent(report.lowk, w),
        percent(report.full, w)
    ));
    out.push_str(&format!(
        "post-fill windows {} (IN/OUT {:.2}%)\n",
        report.post_fill_windows(),
        percent(report.inout, report.post_fill_windows())
    ));
    out
}

/// Repeated timed runs of one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub runs: Vec<RunReport>,
}

impl BenchSummary {
    pub fn throughputs(&self) -> Vec<f64> {
        self.runs.iter().map(RunReport::throughput_mb_s).collect()
    }

    pub fn mean_throughput(&self) -> f64 {
        let t = self.throughputs();
        t.iter().sum::<f64>() / t.len().max(1) as f64
    }

    pub fn median_throughput(&self) -> f64 {
        median(&self.throughputs())
    }

    /// Mean over runs that produced latency samples.
    pub fn mean_latency_ms(&self) -> Option<f64> {
        let samples: Vec<f64> = self.runs.iter().filter_map(|r| r.mean_latency_ms).collect();
        (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
    }

    pub fn report(&self) -> String {
        let latency = match self.mean_latency_ms() {
            Some(ms) => format!("{ms:.3}"),
            None => "n/a".to_string(),
        };
        format!(
            "runs={}\nthroughput_mb_s_mean={:.3}\nthroughput_mb_s_median={:.3}\nlatency_ms_mean={latency}",
            self.runs.len(),
            self.mean_throughput(),
            self.median_throughput()
        )
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// `runs` independent runs, each on a fresh engine, anomalies discarded.
pub fn bench(
    data: &[u8],
    metadata: &Metadata,
    config: &RunConfig,
    runs: usize,
) -> Result<BenchSummary, CommandError> {
    let runs = (0..runs)
        .map(|_| run_replay(data, metadata, config, NullSink::default()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchSummary { runs })
}

/// Writes anomalies to `out` in the output line format.
pub fn write_lines<W: Write>(out: W, anomalies: &[Anomaly]) -> Result<(), CommandError> {
    crate::pipeline::write_anomalies(out, anomalies)
        .map_err(|e| CommandError::Run(RunError::Sink(e)))
}
