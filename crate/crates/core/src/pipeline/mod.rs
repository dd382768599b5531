//! Stage orchestration and artifact persistence.
//!
//! Every stage reads its inputs either from the configured input files or from
//! artifacts of earlier stages in the run directory, and writes its outputs
//! there. `manifest.toml` records the configuration echo, its hash, the seed,
//! the index weights and a SHA-256 digest of every input and output file.

mod artifacts;
pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{self, CorpusData, CorpusFormat, PatentRecord, Severity, SyntheticCorpus};
use crate::embed::{fuse_embeddings, load_embeddings_as, EmbedError, EmbeddingKind, EmbeddingTable};
use crate::hgraph::{build_graph, initial_features, HeteroGraph, NodeType, Relation};
use crate::hgt::{self, HgtError, LinkObjective};
use crate::index::{score_corpus, ConvergenceScores, Variant, VariantComponents};
use crate::metrics::{compute_metrics, corpus_depths, SecondaryWeights};
use crate::stats::{self, Bandwidth, GroupStat};

pub use artifacts::{read_regression, ScoreTable, NA};
pub use config::{ConfigError, EvalConfig, IndexConfig, PathsConfig, RunConfig, StatsConfig, Transform};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const IPC_TEXTS_FILE: &str = "ipc_texts.tsv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.tsv";
pub const NODES_FILE: &str = "graph_nodes.tsv";
pub const EDGES_FILE: &str = "graph_edges.tsv";
pub const CHECKPOINT_FILE: &str = "checkpoint.tsv";
pub const STRUCTURAL_FILE: &str = "structural.tsv";
pub const LOSS_FILE: &str = "train_loss.tsv";
pub const TRAIN_EVAL_FILE: &str = "train_eval.tsv";
pub const FUSED_FILE: &str = "fused.tsv";
pub const SCORES_FILE: &str = "scores.tsv";
pub const WEIGHTS_FILE: &str = "weights.tsv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SUMMARY_FILE: &str = "summary.txt";

pub const VARIANT_NORMALIZATION: &str = "v1-v7 min-max normalized over the corpus; v8 is the index itself";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("{stage}: numerical failure: {message}")]
    Numerical { stage: &'static str, message: String },
    #[error("{stage}: {}: {source}", path.display())]
    Io { stage: &'static str, path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// Process exit code: 1 config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data { .. } | PipelineError::Io { .. } => 2,
            PipelineError::Numerical { .. } => 3,
        }
    }

    fn data(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Data { stage, message: e.to_string() }
    }

    fn numerical(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Numerical { stage, message: e.to_string() }
    }

    fn hgt(stage: &'static str, e: HgtError) -> Self {
        match e {
            HgtError::NonFinite(_) => Self::numerical(stage, e),
            other => Self::data(stage, other),
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub variant_normalization: String,
    pub dependent_transform: String,
    pub weights: Option<ManifestWeights>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Manifest {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            seed: cfg.seed,
            config_hash: cfg.hash(),
            variant_normalization: VARIANT_NORMALIZATION.into(),
            dependent_transform: cfg.stats.transform.as_str().into(),
            weights: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: cfg.clone(),
        }
    }

    pub fn load(path: &Path) -> Option<Self> {
        toml::from_str(&fs::read_to_string(path).ok()?).ok()
    }
}

/// A run directory bound to one configuration.
pub struct Run {
    cfg: RunConfig,
    out: PathBuf,
    manifest: Manifest,
}

impl Run {
    /// Creates the run directory. A manifest left by an earlier stage with the
    /// same configuration is extended; otherwise a fresh one is started.
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let out = cfg.paths.out.clone();
        fs::create_dir_all(&out).map_err(|source| PipelineError::Io { stage: "setup", path: out.clone(), source })?;
        let fresh = Manifest::new(&cfg);
        let manifest = match Manifest::load(&out.join(MANIFEST_FILE)) {
            Some(m) if m.config_hash == fresh.config_hash => m,
            _ => fresh,
        };
        Ok(Self { cfg, out, manifest })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn emit(&mut self, stage: &'static str, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|source| PipelineError::Io { stage, path, source })?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn save_manifest(&self, stage: &'static str) -> Result<()> {
        let text = toml::to_string(&self.manifest).map_err(|e| PipelineError::data(stage, e))?;
        let path = self.out.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|source| PipelineError::Io { stage, path, source })
    }

    fn read_input(&mut self, stage: &'static str, key: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|source| PipelineError::Io { stage, path: path.to_path_buf(), source })?;
        self.manifest.inputs.insert(key.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn read_artifact(&self, stage: &'static str, name: &str) -> Result<String> {
        let path = self.out.join(name);
        fs::read_to_string(&path).map_err(|_| PipelineError::Data {
            stage,
            message: format!("missing artifact {} (run the producing stage first)", path.display()),
        })
    }

    // ---- ingest ----

    /// Parses and validates the input corpus; writes the normalized corpus, the
    /// IPC text table and the record diagnostics.
    pub fn ingest(&mut self) -> Result<CorpusData> {
        const STAGE: &str = "ingest";
        let corpus_path = self.cfg.require(&self.cfg.paths.corpus, "corpus")?;
        let texts_path = self.cfg.require(&self.cfg.paths.ipc_texts, "ipc_texts")?;
        let raw = self.read_input(STAGE, "corpus", &corpus_path)?;
        let texts = self.read_input(STAGE, "ipc_texts", &texts_path)?;
        let format = CorpusFormat::from_path(&corpus_path);
        let parsed = corpus::parse_records(raw.as_slice(), format).map_err(|e| PipelineError::data(STAGE, e))?;
        let rejected = parsed.rejected().count();
        if parsed.records.is_empty() {
            return Err(PipelineError::Data {
                stage: STAGE,
                message: format!("empty corpus: no valid records in {} ({rejected} rejected)", corpus_path.display()),
            });
        }
        let ipc_texts = corpus::parse_ipc_texts(texts.as_slice()).map_err(|e| PipelineError::data(STAGE, e))?;
        let data = CorpusData::new(parsed.records.clone(), ipc_texts).map_err(|e| PipelineError::data(STAGE, e))?;

        let mut buf = Vec::new();
        data.write_records(&mut buf, CorpusFormat::Jsonl).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, CORPUS_FILE, &buf)?;
        let mut buf = Vec::new();
        data.write_ipc_texts(&mut buf).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, IPC_TEXTS_FILE, &buf)?;
        let rows = parsed.diagnostics.iter().map(|d| {
            let sev = match d.severity {
                Severity::Warning => "warning",
                Severity::Rejected => "rejected",
            };
            vec![d.line.to_string(), sev.to_string(), d.message.replace(['\t', '\n'], " ")]
        });
        self.emit(STAGE, DIAGNOSTICS_FILE, &artifacts::table(&["line", "severity", "message"], rows))?;
        self.save_manifest(STAGE)?;
        Ok(data)
    }

    pub fn load_corpus(&self, stage: &'static str) -> Result<CorpusData> {
        let records = self.read_artifact(stage, CORPUS_FILE)?;
        let texts = self.read_artifact(stage, IPC_TEXTS_FILE)?;
        let parsed = corpus::parse_records(records.as_bytes(), CorpusFormat::Jsonl)
            .map_err(|e| PipelineError::data(stage, e))?;
        if let Some(d) = parsed.rejected().next() {
            return Err(PipelineError::data(stage, format!("corrupted {CORPUS_FILE}: {}", d.message)));
        }
        if parsed.records.is_empty() {
            return Err(PipelineError::data(stage, "empty corpus"));
        }
        let ipc = corpus::parse_ipc_texts(texts.as_bytes()).map_err(|e| PipelineError::data(stage, e))?;
        CorpusData::new(parsed.records, ipc).map_err(|e| PipelineError::data(stage, e))
    }

    fn load_semantic(&mut self, stage: &'static str) -> Result<EmbeddingTable> {
        let path = self.cfg.require(&self.cfg.paths.embeddings, "embeddings")?;
        let bytes = self.read_input(stage, "embeddings", &path)?;
        EmbeddingTable::read(bytes.as_slice(), EmbeddingKind::Semantic).map_err(|e| PipelineError::data(stage, e))
    }

    // ---- graph ----

    pub fn graph(&mut self) -> Result<HeteroGraph> {
        const STAGE: &str = "graph";
        let corpus = self.load_corpus(STAGE)?;
        let semantic = self.load_semantic(STAGE)?;
        let graph = build_graph(&corpus, &semantic, &self.cfg.graph).map_err(|e| PipelineError::data(STAGE, e))?;
        let mut nodes = Vec::new();
        graph.write_nodes(&mut nodes).map_err(|e| PipelineError::data(STAGE, e))?;
        let mut edges = Vec::new();
        graph.write_edges(&mut edges).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, NODES_FILE, &nodes)?;
        self.emit(STAGE, EDGES_FILE, &edges)?;
        self.save_manifest(STAGE)?;
        Ok(graph)
    }

    pub fn load_graph(&self, stage: &'static str) -> Result<HeteroGraph> {
        let nodes = self.read_artifact(stage, NODES_FILE)?;
        let edges = self.read_artifact(stage, EDGES_FILE)?;
        HeteroGraph::read(nodes.as_bytes(), edges.as_bytes()).map_err(|e| PipelineError::data(stage, e))
    }

    // ---- train ----

    /// Trains the encoder with a held-out share of PatentIpc edges, reports the
    /// held-out AUC, and encodes the full graph with the trained parameters.
    pub fn train(&mut self) -> Result<TrainSummary> {
        const STAGE: &str = "train";
        let graph = self.load_graph(STAGE)?;
        let semantic = self.load_semantic(STAGE)?;
        let tcfg = self.cfg.train.clone();
        let (train_graph, held) = if self.cfg.eval.holdout_fraction > 0.0 {
            hgt::holdout_patent_ipc(&graph, self.cfg.eval.holdout_fraction, tcfg.seed ^ 0x5EED)
        } else {
            (graph.clone(), Vec::new())
        };
        let init_train = initial_features(&train_graph, &semantic).map_err(|e| PipelineError::data(STAGE, e))?;
        let outcome = hgt::train(&train_graph, &init_train, &tcfg).map_err(|e| PipelineError::hgt(STAGE, e))?;

        let auc = if held.is_empty() {
            None
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ 0xA0C);
            let negatives = LinkObjective::sample(&graph, 1, &mut rng).negatives;
            let pos = hgt::link_scores(&train_graph, &outcome.embeddings, &held);
            let neg = hgt::link_scores(&train_graph, &outcome.embeddings, &negatives);
            Some(hgt::link_auc(&pos, &neg))
        };

        let init_full = initial_features(&graph, &semantic).map_err(|e| PipelineError::data(STAGE, e))?;
        let structural = hgt::encode(&graph, &init_full, &outcome.params)
            .map_err(|e| PipelineError::hgt(STAGE, e))?
            .with_kind(EmbeddingKind::Structural);
        if structural.iter().any(|(_, v)| v.iter().any(|x| !x.is_finite())) {
            return Err(PipelineError::numerical(STAGE, "structural embedding contains NaN/Inf"));
        }

        let mut ckpt = Vec::new();
        hgt::write_checkpoint(&outcome.params, &mut ckpt).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, CHECKPOINT_FILE, &ckpt)?;
        let mut emb = Vec::new();
        structural.write(&mut emb).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, STRUCTURAL_FILE, &emb)?;
        let loss_rows = outcome.loss_history.iter().enumerate().map(|(e, l)| vec![e.to_string(), artifacts::fmt_f(*l)]);
        self.emit(STAGE, LOSS_FILE, &artifacts::table(&["epoch", "loss"], loss_rows))?;
        let summary = TrainSummary {
            initial_loss: outcome.initial_loss(),
            final_loss: outcome.final_loss(),
            holdout_edges: held.len(),
            holdout_auc: auc,
        };
        let eval_rows = vec![
            vec!["initial_loss".to_string(), artifacts::fmt_f(summary.initial_loss)],
            vec!["final_loss".to_string(), artifacts::fmt_f(summary.final_loss)],
            vec!["holdout_edges".to_string(), summary.holdout_edges.to_string()],
            vec!["holdout_auc".to_string(), artifacts::fmt_opt(summary.holdout_auc)],
        ];
        self.emit(STAGE, TRAIN_EVAL_FILE, &artifacts::table(&["metric", "value"], eval_rows))?;
        self.save_manifest(STAGE)?;
        Ok(summary)
    }

    fn load_structural(&self, stage: &'static str) -> Result<EmbeddingTable> {
        let text = self.read_artifact(stage, STRUCTURAL_FILE)?;
        EmbeddingTable::read(text.as_bytes(), EmbeddingKind::Structural).map_err(|e| PipelineError::data(stage, e))
    }

    // ---- score ----

    pub fn score(&mut self) -> Result<ConvergenceScores> {
        const STAGE: &str = "score";
        let corpus = self.load_corpus(STAGE)?;
        let semantic = self.load_semantic(STAGE)?;
        let structural = self.load_structural(STAGE)?;
        let codes = corpus.distinct_ipcs();
        let missing = |e: EmbedError| PipelineError::data(STAGE, format!("IPC embeddings: {e}"));
        let sem = semantic.restrict(codes.iter().map(String::as_str)).map_err(missing)?;
        let st = structural.restrict(codes.iter().map(String::as_str)).map_err(missing)?;
        let fused = fuse_embeddings(&st, &sem).map_err(missing)?;

        let weights = if self.cfg.metrics.attention_weighted_depth2 {
            Some(self.secondary_attention(STAGE, &corpus, &semantic)?)
        } else {
            None
        };
        let mcfg = &self.cfg.metrics;
        let m = compute_metrics(&corpus, &fused, mcfg, weights.as_ref()).map_err(|e| PipelineError::data(STAGE, e))?;
        let sem_depth = corpus_depths(&corpus, &sem, mcfg, None).map_err(|e| PipelineError::data(STAGE, e))?;
        let st_depth = corpus_depths(&corpus, &st, mcfg, None).map_err(|e| PipelineError::data(STAGE, e))?;
        let components = VariantComponents {
            clustering: Some(m.iter().map(|p| p.clustering).collect()),
            avg_distance: Some(m.iter().map(|p| p.avg_distance).collect()),
            semantic_depth: Some(sem_depth),
            structural_depth: Some(st_depth),
            fused_depth: Some(m.iter().map(|p| (p.d1, p.d2)).collect()),
            shannon: Some(m.iter().map(|p| p.breadth_norm).collect()),
            rao_stirling: Some(m.iter().map(|p| p.rao_stirling).collect()),
        };
        let ids: Vec<String> = m.iter().map(|p| p.patent_id.clone()).collect();
        let scores = match score_corpus(ids, &components, &self.cfg.index.variants) {
            Ok(s) => s,
            Err(crate::index::IndexError::TooFewRows(n)) => {
                return Err(PipelineError::data(STAGE, format!("entropy weighting needs at least 2 patents, got {n}")))
            }
            Err(e) => return Err(PipelineError::data(STAGE, e)),
        };

        let mut columns: Vec<(String, Vec<f64>)> = vec![
            ("D1".into(), scores.d1.clone()),
            ("D2".into(), scores.d2.clone()),
            ("breadth_raw".into(), m.iter().map(|p| p.breadth_raw).collect()),
            ("breadth_norm".into(), scores.d3.clone()),
            ("rao_stirling".into(), m.iter().map(|p| p.rao_stirling).collect()),
        ];
        for v in &scores.variants {
            columns.push((v.variant.label().into(), v.values.clone()));
        }
        if columns.iter().any(|c| c.1.iter().any(|x| !x.is_finite())) {
            return Err(PipelineError::numerical(STAGE, "score column contains NaN/Inf"));
        }
        let table = ScoreTable { patent_ids: scores.patent_ids.clone(), columns };

        let mut buf = Vec::new();
        fused.write(&mut buf).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, FUSED_FILE, &buf)?;
        self.emit(STAGE, SCORES_FILE, &table.to_bytes())?;
        let weight_rows = scores.variants.iter().filter(|v| !v.weights.0.is_empty()).map(|v| {
            let mut r = vec![v.variant.label().to_string()];
            r.extend(v.weights.0.iter().map(|w| artifacts::fmt_f(*w)));
            r.resize(4, NA.to_string());
            r
        });
        self.emit(STAGE, WEIGHTS_FILE, &artifacts::table(&["variant", "w1", "w2", "w3"], weight_rows))?;
        let w = &scores.weights.0;
        self.manifest.weights = Some(ManifestWeights { w1: w[0], w2: w[1], w3: w[2] });
        self.save_manifest(STAGE)?;
        Ok(scores)
    }

    /// Last-layer attention of each patent on its secondary codes.
    fn secondary_attention(
        &self,
        stage: &'static str,
        corpus: &CorpusData,
        semantic: &EmbeddingTable,
    ) -> Result<SecondaryWeights> {
        let graph = self.load_graph(stage)?;
        let ckpt = self.read_artifact(stage, CHECKPOINT_FILE)?;
        let params = hgt::read_checkpoint(BufReader::new(ckpt.as_bytes())).map_err(|e| PipelineError::hgt(stage, e))?;
        let init = initial_features(&graph, semantic).map_err(|e| PipelineError::data(stage, e))?;
        let (_, att) = hgt::encode_with_attention(&graph, &init, &params).map_err(|e| PipelineError::hgt(stage, e))?;
        let last = att.layers.last().expect("encoder has layers");
        let mut out = SecondaryWeights::new();
        for r in &corpus.records {
            let Some(p) = graph.find(NodeType::Patent, &r.patent_id) else { continue };
            let by_code: BTreeMap<&str, f64> = last.per_node[p]
                .iter()
                .filter(|e| e.0 == Relation::PatentIpc)
                .map(|e| (graph.node(e.1).key.as_str(), e.2))
                .collect();
            out.insert(
                r.patent_id.clone(),
                r.secondary_ipcs.iter().map(|c| by_code.get(c.as_str()).copied().unwrap_or(0.0)).collect(),
            );
        }
        Ok(out)
    }

    pub fn load_scores(&self, stage: &'static str) -> Result<ScoreTable> {
        let text = self.read_artifact(stage, SCORES_FILE)?;
        ScoreTable::parse(&text).map_err(|e| PipelineError::data(stage, e))
    }

    // ---- report ----

    pub fn report(&mut self) -> Result<Report> {
        const STAGE: &str = "report";
        let corpus = self.load_corpus(STAGE)?;
        let scores = self.load_scores(STAGE)?;
        let by_id: BTreeMap<&str, &PatentRecord> = corpus.records.iter().map(|r| (r.patent_id.as_str(), r)).collect();
        let mut recs = Vec::with_capacity(scores.patent_ids.len());
        for id in &scores.patent_ids {
            recs.push(
                *by_id
                    .get(id.as_str())
                    .ok_or_else(|| PipelineError::data(STAGE, format!("scored patent {id} is not in the corpus")))?,
            );
        }
        let tci = scores.column("v8").ok_or_else(|| PipelineError::data(STAGE, "scores lack the v8 column"))?.to_vec();
        let variant_cols: Vec<(String, Vec<f64>)> = Variant::ALL
            .iter()
            .filter_map(|v| scores.column(v.label()).map(|c| (v.label().to_string(), c.to_vec())))
            .collect();

        let corr = stats::correlation_matrix(&variant_cols).ok();
        if let Some(m) = &corr {
            self.emit(STAGE, "correlation_pearson.tsv", &artifacts::correlation_table(m, false))?;
            self.emit(STAGE, "correlation_spearman.tsv", &artifacts::correlation_table(m, true))?;
        }

        let t = self.cfg.stats.transform;
        let pages: Vec<f64> = recs.iter().map(|r| r.pages as f64).collect();
        let claims: Vec<f64> = recs.iter().map(|r| r.claims as f64).collect();
        let bcite: Vec<f64> = recs.iter().map(|r| r.backward_citations as f64).collect();
        let years: Vec<i32> = recs.iter().map(|r| r.year).collect();
        let deps: Vec<(&str, Vec<f64>)> = vec![
            ("first_claims", recs.iter().map(|r| t.apply(r.first_claims)).collect()),
            ("forward_citations", recs.iter().map(|r| t.apply(r.forward_citations as f64)).collect()),
        ];
        let fit = |y: &[f64], name: &str, x: &[f64]| {
            stats::ols_fit(y, &[(name, x), ("pages", &pages), ("claims", &claims), ("bcite", &bcite)], Some(&years))
        };

        let mut regressions = BTreeMap::new();
        let mut notes = Vec::new();
        for (dep, y) in &deps {
            let rows = match fit(y, "tci", &tci) {
                Ok(r) => {
                    let rows = artifacts::regression_rows(&r);
                    regressions.insert(dep.to_string(), r);
                    rows
                }
                Err(e) => {
                    notes.push(format!("regression of {dep} on tci failed: {e}"));
                    Vec::new()
                }
            };
            self.emit(STAGE, &format!("regression_{dep}.tsv"), &artifacts::table(&artifacts::REGRESSION_HEADER, rows))?;
        }

        let mut variant_rows = Vec::new();
        for (dep, y) in &deps {
            for (label, x) in &variant_cols {
                let mut row = vec![dep.to_string(), label.clone()];
                match fit(y, label, x) {
                    Ok(r) => {
                        let c = r.coefficient(label).expect("variant column present");
                        row.extend([c.estimate, c.std_error, c.p_value, r.r_squared].map(artifacts::fmt_f));
                        row.push(r.n_obs.to_string());
                    }
                    Err(e) => {
                        notes.push(format!("regression of {dep} on {label} failed: {e}"));
                        row.extend([NA; 4].map(String::from));
                        row.push(recs.len().to_string());
                    }
                }
                variant_rows.push(row);
            }
        }
        self.emit(
            STAGE,
            "regression_variants.tsv",
            &artifacts::table(
                &["dependent", "variant", "coefficient", "std_error", "p_value", "r_squared", "n_obs"],
                variant_rows,
            ),
        )?;

        let sections: Vec<String> = recs.iter().map(|r| r.main_section().to_string()).collect();
        self.emit(
            STAGE,
            "kde.tsv",
            &kde_table(&tci, &sections, &self.cfg.stats).map_err(|e| PipelineError::data(STAGE, e))?,
        )?;

        let (fc, fw) = (&deps[0].1, &deps[1].1);
        let buckets = year_buckets(&years, self.cfg.stats.trend_window);
        let year_stats = stats::group_trend(&tci, &buckets).map_err(|e| PipelineError::data(STAGE, e))?;
        let year_extra = quality_correlations(&tci, fc, fw, &buckets).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, "trend_year.tsv", &artifacts::trend_table("year", &year_stats, &year_extra))?;
        let section_stats = stats::group_trend(&tci, &sections).map_err(|e| PipelineError::data(STAGE, e))?;
        let section_extra = quality_correlations(&tci, fc, fw, &sections).map_err(|e| PipelineError::data(STAGE, e))?;
        self.emit(STAGE, "trend_section.tsv", &artifacts::trend_table("ipc_section", &section_stats, &section_extra))?;

        let report =
            Report { correlations: corr, regressions, year_trend: year_stats, section_trend: section_stats, notes };
        let summary = self.summary_text(&scores, &report);
        self.emit(STAGE, SUMMARY_FILE, summary.as_bytes())?;
        self.save_manifest(STAGE)?;
        Ok(report)
    }

    fn summary_text(&self, scores: &ScoreTable, r: &Report) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "patents: {}", scores.patent_ids.len());
        let _ = writeln!(s, "seed: {}", self.cfg.seed);
        let _ = writeln!(s, "config_hash: {}", self.manifest.config_hash);
        if let Some(w) = &self.manifest.weights {
            let _ = writeln!(s, "weights: w1={} w2={} w3={}", w.w1, w.w2, w.w3);
        }
        let _ = writeln!(s, "variant normalization: {VARIANT_NORMALIZATION}");
        let _ = writeln!(s, "dependent transform: {}", self.cfg.stats.transform.as_str());
        if let Some(tci) = scores.column("v8") {
            let mean = tci.iter().sum::<f64>() / tci.len() as f64;
            let _ = writeln!(s, "tci mean: {mean}  median: {}", stats::median(tci));
        }
        for (dep, reg) in &r.regressions {
            if let Some(c) = reg.coefficient("tci") {
                let _ = writeln!(
                    s,
                    "{dep} ~ tci: beta={} se={} p={} r2={} n={}",
                    c.estimate, c.std_error, c.p_value, reg.r_squared, reg.n_obs
                );
            }
        }
        if let Some(m) = &r.correlations {
            for l in &m.labels {
                if l != "v8" {
                    let _ = writeln!(s, "pearson(v8, {l}): {}", artifacts::fmt_opt(m.pearson_between("v8", l)));
                }
            }
        }
        for n in &r.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

/// Start year of each record's `window`-year bucket, anchored at the earliest year.
fn year_buckets(years: &[i32], window: u32) -> Vec<i32> {
    let first = years.iter().copied().min().unwrap_or(0);
    let w = window.max(1) as i32;
    years.iter().map(|y| first + (y - first) / w * w).collect()
}

type NamedColumns = Vec<(&'static str, Vec<Option<f64>>)>;

/// Per-group Pearson correlation of the index with both quality measures.
fn quality_correlations<K: Ord + Clone>(
    tci: &[f64],
    first_claims: &[f64],
    forward: &[f64],
    keys: &[K],
) -> std::result::Result<NamedColumns, stats::StatsError> {
    let a = stats::grouped_pearson(tci, first_claims, keys)?;
    let b = stats::grouped_pearson(tci, forward, keys)?;
    Ok(vec![
        ("pearson_first_claims", a.into_iter().map(|x| x.1).collect()),
        ("pearson_forward_citations", b.into_iter().map(|x| x.1).collect()),
    ])
}

fn kde_table(tci: &[f64], sections: &[String], cfg: &StatsConfig) -> std::result::Result<Vec<u8>, stats::StatsError> {
    let all = stats::kde_auto_grid(tci, cfg.kde_points, cfg.bandwidth)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut push = |group: &str, density: &[f64], h: f64| {
        for (x, d) in all.grid.iter().zip(density) {
            rows.push(vec![group.to_string(), artifacts::fmt_f(h), artifacts::fmt_f(*x), artifacts::fmt_f(*d)]);
        }
    };
    push("all", &all.density, all.bandwidth);
    let mut by_section: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (s, v) in sections.iter().zip(tci) {
        by_section.entry(s.as_str()).or_default().push(*v);
    }
    for (s, vals) in by_section {
        let bw = match cfg.bandwidth {
            Bandwidth::Auto => Bandwidth::Fixed(stats::silverman_bandwidth(&vals)),
            b => b,
        };
        let c = stats::kde_density(&vals, &all.grid, bw)?;
        push(s, &c.density, c.bandwidth);
    }
    Ok(artifacts::table(&["group", "bandwidth", "x", "density"], rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub holdout_edges: usize,
    pub holdout_auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub correlations: Option<stats::CorrelationMatrix>,
    pub regressions: BTreeMap<String, stats::RegressionResult>,
    pub year_trend: Vec<GroupStat<i32>>,
    pub section_trend: Vec<GroupStat<String>>,
    pub notes: Vec<String>,
}

/// Outcome of an end-to-end run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub train: TrainSummary,
    pub scores: ConvergenceScores,
    pub report: Report,
    pub manifest: Manifest,
}

/// ingest → graph → train → score → report, all into `cfg.paths.out`.
pub fn run_pipeline(cfg: RunConfig) -> Result<PipelineOutcome> {
    let cfg = cfg.finalize()?;
    for (p, name) in
        [(&cfg.paths.corpus, "corpus"), (&cfg.paths.ipc_texts, "ipc_texts"), (&cfg.paths.embeddings, "embeddings")]
    {
        cfg.require(p, name)?;
    }
    let mut run = Run::new(cfg)?;
    run.ingest()?;
    run.graph()?;
    let train = run.train()?;
    let scores = run.score()?;
    let report = run.report()?;
    Ok(PipelineOutcome { train, scores, report, manifest: run.manifest.clone() })
}

/// Generates a synthetic corpus into `dir`: corpus, IPC texts, semantic
/// embeddings and the truth table.
pub fn run_synth(cfg: &RunConfig, dir: &Path) -> Result<SyntheticCorpus> {
    const STAGE: &str = "synth";
    let s = corpus::generate_synthetic_corpus(&cfg.synth, cfg.seed)
        .map_err(|e| PipelineError::Config(ConfigError::Invalid(e.to_string())))?;
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io { stage: STAGE, path: dir.to_path_buf(), source })?;
    s.save(dir, CorpusFormat::Jsonl).map_err(|source| PipelineError::Io {
        stage: STAGE,
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(s)
}

/// Loads a semantic embedding file, mapping failures to data errors.
pub fn load_semantic_file(path: &Path) -> Result<EmbeddingTable> {
    load_embeddings_as(path, EmbeddingKind::Semantic).map_err(|e| PipelineError::data("embed-load", e))
}
