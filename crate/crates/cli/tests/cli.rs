use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn tci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tci")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, corpus: &Path, extra: &str) -> PathBuf {
    let small = fixtures().join("small");
    let text = format!(
        "seed = 3\n{extra}\n[paths]\ncorpus = \"{}\"\nipc_texts = \"{}\"\nembeddings = \"{}\"\n[train]\nepochs = 20\n",
        corpus.display(),
        small.join("ipc_texts.tsv").display(),
        small.join("embeddings.tsv").display()
    );
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn small_config(dir: &Path) -> PathBuf {
    write_config(dir, &fixtures().join("small/corpus.jsonl"), "")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn pipeline_twice_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = tci(&["pipeline", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fa = files(&a);
    assert_eq!(fa, files(&b));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    for want in
        ["scores.tsv", "weights.tsv", "manifest.toml", "kde.tsv", "trend_year.tsv", "regression_first_claims.tsv"]
    {
        assert!(names.contains(&want), "missing {want}");
    }
    let manifest = String::from_utf8(fa.iter().find(|f| f.0 == "manifest.toml").unwrap().1.clone()).unwrap();
    for name in names.iter().filter(|n| **n != "manifest.toml") {
        assert!(manifest.contains(&format!("\"{name}\" = ")), "{name} not hashed in manifest");
    }
}

#[test]
fn stagewise_run_matches_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    let c = cfg.to_str().unwrap();
    assert!(tci(&["pipeline", "--config", c, "--out", whole.to_str().unwrap()]).status.success());
    for stage in ["ingest", "graph", "train", "score", "report"] {
        let o = tci(&[stage, "--config", c, "--out", staged.to_str().unwrap()]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(files(&whole), files(&staged));

    // resuming a single stage reproduces its outputs
    let before = fs::read(staged.join("scores.tsv")).unwrap();
    fs::remove_file(staged.join("scores.tsv")).unwrap();
    assert!(tci(&["score", "--config", c, "--out", staged.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(staged.join("scores.tsv")).unwrap(), before);
}

#[test]
fn empty_corpus_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &fixtures().join("empty_corpus.jsonl"), "");
    let o = tci(&["pipeline", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ingest") && err.contains("empty corpus"), "{err}");
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[metrics]\nsmoothing_k = 0\n").unwrap();
    assert_eq!(tci(&["pipeline", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(1));
    fs::write(&bad, "unknown_key = 1\n").unwrap();
    assert_eq!(tci(&["score", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(1));
    // missing input path
    let cfg = write_config(tmp.path(), &tmp.path().join("absent.jsonl"), "");
    assert_eq!(tci(&["pipeline", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(1));
    assert_eq!(tci(&["ingest", "--config", "/nonexistent/run.toml"]).status.code(), Some(1));
}

#[test]
fn resuming_without_artifacts_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let o = tci(&["train", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("fresh").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing artifact"));
}

#[test]
fn synth_then_pipeline_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let o = tci(&["synth", "--seed", "9", "--n-patents", "40", "--out", data.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["corpus.jsonl", "ipc_texts.tsv", "embeddings.tsv", "truth.tsv"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let run = tmp.path().join("run");
    let o = tci(&[
        "pipeline",
        "--seed",
        "9",
        "--out",
        run.to_str().unwrap(),
        "--corpus",
        data.join("corpus.jsonl").to_str().unwrap(),
        "--ipc-texts",
        data.join("ipc_texts.tsv").to_str().unwrap(),
        "--embeddings",
        data.join("embeddings.tsv").to_str().unwrap(),
        "--epochs",
        "5",
        "--variants",
        "V1,V5",
        "--transform",
        "log1p",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read_to_string(run.join("scores.tsv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "patent_id\tD1\tD2\tbreadth_raw\tbreadth_norm\trao_stirling\tv1\tv5\tv8");
    let manifest = fs::read_to_string(run.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 9"));
    assert!(manifest.contains("dependent_transform = \"log1p\""));
}
