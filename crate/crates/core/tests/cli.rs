use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn skipstage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skipstage")).args(args).output().expect("spawn skipstage")
}

fn ok(args: &[&str]) -> String {
    let out = skipstage(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

struct Corpus {
    _dir: TempDir,
    data: PathBuf,
    meta: PathBuf,
}

impl Corpus {
    fn generate(extra: &[&str]) -> Self {
        let dir = TempDir::new().unwrap();
        let data = dir.path().join("corpus.rdfish");
        let meta = dir.path().join("meta.csv");
        let mut args = vec!["generate", "--output", s(&data), "--meta", s(&meta)];
        args.extend_from_slice(extra);
        ok(&args);
        Self { _dir: dir, data, meta }
    }

    fn path(&self, name: &str) -> PathBuf {
        self._dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_matches_oracle_file() {
    let c = Corpus::generate(&["--machines", "6", "--sensors", "5", "--groups", "400", "--seed", "3"]);
    let engine = c.path("engine.txt");
    let oracle = c.path("oracle.txt");
    let common = ["--input", s(&c.data), "--meta", s(&c.meta), "--threshold", "0.01"];
    let out = skipstage(&[&["run", "--workers", "4", "--output", s(&engine)][..], &common].concat());
    assert!(out.status.success());
    let report = String::from_utf8(out.stderr).unwrap();
    assert!(report.contains("messages=2400"), "{report}");
    ok(&[&["oracle", "--output", s(&oracle)][..], &common].concat());
    let engine = std::fs::read(engine).unwrap();
    assert!(!engine.is_empty());
    assert_eq!(engine, std::fs::read(oracle).unwrap());
}

#[test]
fn single_worker_no_sync_writes_the_same_file() {
    let c = Corpus::generate(&["--machines", "4", "--sensors", "4", "--groups", "300", "--seed", "8"]);
    let sync = c.path("sync.txt");
    let direct = c.path("direct.txt");
    let common = ["--input", s(&c.data), "--meta", s(&c.meta), "--workers", "1"];
    ok(&[&["run", "--output", s(&sync)][..], &common].concat());
    ok(&[&["run", "--no-sync", "--output", s(&direct)][..], &common].concat());
    assert_eq!(std::fs::read(sync).unwrap(), std::fs::read(direct).unwrap());
}

#[test]
fn window_one_is_rejected() {
    let c = Corpus::generate(&["--machines", "1", "--sensors", "1", "--groups", "5"]);
    let out = skipstage(&["run", "--input", s(&c.data), "--meta", s(&c.meta), "--window", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn malformed_input_fails_the_oracle() {
    let c = Corpus::generate(&["--machines", "2", "--sensors", "2", "--groups", "5"]);
    let mut data = std::fs::read(&c.data).unwrap();
    let at = data.windows(7).position(|w| w == b"hasValu").unwrap();
    data[at] = b'X';
    std::fs::write(&c.data, data).unwrap();
    let out = skipstage(&["oracle", "--input", s(&c.data), "--meta", s(&c.meta)]);
    assert!(!out.status.success());
}

#[test]
fn missing_input_is_an_error() {
    let out = skipstage(&["run", "--input", "/nonexistent/c.rdfish", "--meta", "/nonexistent/m.csv"]);
    assert!(!out.status.success());
}

#[test]
fn profile_of_constant_corpus() {
    let c = Corpus::generate(&["--model", "constant", "--machines", "3", "--sensors", "4", "--groups", "60"]);
    let table = ok(&["profile", "--input", s(&c.data), "--meta", s(&c.meta)]);
    let rows: Vec<&str> = table.lines().collect();
    assert!(rows[0].contains("IN/OUT") && rows[0].contains("FULL"));
    let cells: Vec<&str> = rows[1].split_whitespace().collect();
    assert_eq!(cells, ["612", "0.00%", "100.00%", "0.00%", "0.00%"]);
}

#[test]
fn profile_of_cyclic_corpus() {
    let c = Corpus::generate(&["--model", "cyclic", "--period", "3", "--clusters", "3", "--groups", "80"]);
    let table = ok(&["profile", "--input", s(&c.data), "--meta", s(&c.meta), "--window", "9"]);
    assert!(table.contains("(IN/OUT 100.00%)"), "{table}");
}

#[test]
fn bench_of_quiet_corpus_has_no_latency() {
    let c = Corpus::generate(&["--model", "constant", "--machines", "2", "--sensors", "2", "--groups", "50"]);
    let out = ok(&["bench", "--input", s(&c.data), "--meta", s(&c.meta), "--runs", "2"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("run=")).count(), 2);
    assert!(out.contains("latency_ms_mean=n/a"));
    assert!(out.contains("throughput_mb_s_median="));
}

#[test]
fn generate_is_deterministic() {
    let a = Corpus::generate(&["--seed", "5", "--groups", "30"]);
    let b = Corpus::generate(&["--seed", "5", "--groups", "30"]);
    assert_eq!(std::fs::read(&a.data).unwrap(), std::fs::read(&b.data).unwrap());
    assert_eq!(std::fs::read(&a.meta).unwrap(), std::fs::read(&b.meta).unwrap());
}
