use std::fs;
use std::path::{Path, PathBuf};

use tci_core::corpus::{generate_synthetic_corpus, CorpusFormat, SynthConfig};
use tci_core::pipeline::{run_pipeline, ConfigError, Manifest, PipelineError, Run, RunConfig};

fn synth_dir(dir: &Path, n: usize) -> PathBuf {
    let cfg = SynthConfig { n_patents: n, ..SynthConfig::default() };
    let s = generate_synthetic_corpus(&cfg, 4).unwrap();
    let data = dir.join("data");
    fs::create_dir_all(&data).unwrap();
    s.save(&data, CorpusFormat::Jsonl).unwrap();
    data
}

fn config(data: &Path, out: &Path) -> RunConfig {
    let mut cfg = RunConfig { seed: 21, ..RunConfig::default() };
    cfg.train.epochs = 15;
    cfg.paths.corpus = Some(data.join("corpus.jsonl"));
    cfg.paths.ipc_texts = Some(data.join("ipc_texts.tsv"));
    cfg.paths.embeddings = Some(data.join("embeddings.tsv"));
    cfg.paths.out = out.to_path_buf();
    cfg
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn manifest_replay_reproduces_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path(), 60);
    let first = tmp.path().join("first");
    let outcome = run_pipeline(config(&data, &first)).unwrap();
    assert_eq!(outcome.scores.patent_ids.len(), 60);

    let manifest = Manifest::load(&first.join("manifest.toml")).unwrap();
    assert_eq!(manifest.seed, 21);
    assert_eq!(manifest.config.train.seed, 21);
    for name in ["scores.tsv", "structural.tsv", "graph_edges.tsv", "summary.txt"] {
        assert!(manifest.outputs.contains_key(name), "{name}");
    }
    assert_eq!(manifest.inputs.len(), 3);

    let mut replay = manifest.config.clone();
    replay.paths.out = tmp.path().join("replay");
    run_pipeline(replay).unwrap();
    assert_eq!(read_all(&first), read_all(&tmp.path().join("replay")));
}

#[test]
fn seed_changes_training_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path(), 40);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_pipeline(config(&data, &a)).unwrap();
    let mut cfg = config(&data, &b);
    cfg.seed = 22;
    run_pipeline(cfg).unwrap();
    assert_ne!(fs::read(a.join("structural.tsv")).unwrap(), fs::read(b.join("structural.tsv")).unwrap());
    assert_eq!(fs::read(a.join("graph_edges.tsv")).unwrap(), fs::read(b.join("graph_edges.tsv")).unwrap());
}

#[test]
fn malformed_records_are_reported_and_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path(), 30);
    let corpus = data.join("corpus.jsonl");
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push_str("{\"patent_id\": \"BROKEN\"}\nnot json at all\n");
    fs::write(&corpus, text).unwrap();

    let out = tmp.path().join("out");
    let mut run = Run::new(config(&data, &out).finalize().unwrap()).unwrap();
    let ingested = run.ingest().unwrap();
    assert_eq!(ingested.records.len(), 30);
    let diag = fs::read_to_string(out.join("diagnostics.tsv")).unwrap();
    assert!(diag.lines().filter(|l| l.contains("\trejected\t")).count() >= 2, "{diag}");
    assert!(diag.starts_with("line\tseverity\tmessage\n"));
}

#[test]
fn attention_weighted_depth_changes_only_depth_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path(), 50);
    let plain = run_pipeline(config(&data, &tmp.path().join("plain"))).unwrap();
    let mut cfg = config(&data, &tmp.path().join("weighted"));
    cfg.metrics.attention_weighted_depth2 = true;
    let weighted = run_pipeline(cfg).unwrap();
    assert_eq!(plain.scores.d1, weighted.scores.d1);
    assert_eq!(plain.scores.d3, weighted.scores.d3);
    assert!(weighted.scores.d2.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn error_kinds_map_to_exit_codes() {
    let cfg = PipelineError::Config(ConfigError::Invalid("x".into()));
    let data = PipelineError::Data { stage: "ingest", message: "empty corpus".into() };
    let num = PipelineError::Numerical { stage: "train", message: "NaN".into() };
    let io = PipelineError::Io { stage: "score", path: "x".into(), source: std::io::Error::other("boom") };
    assert_eq!([cfg.exit_code(), data.exit_code(), num.exit_code(), io.exit_code()], [1, 2, 3, 2]);
    assert!(data.to_string().starts_with("ingest:"));
}

#[test]
fn missing_paths_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.paths.out = tmp.path().join("o");
    match run_pipeline(cfg) {
        Err(e @ PipelineError::Config(_)) => assert_eq!(e.exit_code(), 1),
        other => panic!("expected config error, got {other:?}"),
    }
}
