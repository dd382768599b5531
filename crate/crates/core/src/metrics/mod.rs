//! Per-patent depth, breadth and co-occurrence baseline scores.
//!
//! Every score is a pure function of one record and immutable corpus-level
//! inputs, so corpus passes run in parallel and return records in input order.

mod breadth;
mod cooc;
mod depth;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::ipc::IpcLevel;
use crate::corpus::{CorpusData, PatentRecord};
use crate::embed::{normalize_in_place, EmbeddingTable};

pub use breadth::{breadth_normalized, breadth_raw, min_max_normalize, rao_stirling, shannon_entropy, BreadthInputs};
pub use cooc::{average_distance_score, build_cooc_network, clustering_coefficient_score, CoocNetwork};
pub use depth::{depth1, depth2, depth2_weighted, dynamic_alpha, DepthInputs};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("patent {patent_id}: no embedding for IPC code {code}")]
    MissingEmbedding { patent_id: String, code: String },
    #[error("invalid metrics configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Smoothing constant `k` of the Depth-2 blend weight.
    pub smoothing_k: u32,
    /// Category level for breadth and the co-occurrence network.
    pub ipc_level: IpcLevel,
    /// Minimum number of co-listing patents for a co-occurrence edge.
    pub min_support: usize,
    /// Distance charged to disconnected pairs; `None` means diameter + 1.
    pub disconnect_penalty: Option<f64>,
    /// Weight the Depth-2 pair mean by the patent's attention on each code.
    pub attention_weighted_depth2: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            smoothing_k: 1,
            ipc_level: IpcLevel::Subclass,
            min_support: 1,
            disconnect_penalty: None,
            attention_weighted_depth2: false,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.smoothing_k == 0 {
            return Err(MetricsError::InvalidConfig("smoothing_k must be a positive integer".into()));
        }
        if self.min_support == 0 {
            return Err(MetricsError::InvalidConfig("min_support must be at least 1".into()));
        }
        if let Some(p) = self.disconnect_penalty {
            if !p.is_finite() || p < 0.0 {
                return Err(MetricsError::InvalidConfig("disconnect_penalty must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Per-patent metric values in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatentMetrics {
    pub patent_id: String,
    pub d1: f64,
    pub d2: f64,
    pub breadth_raw: f64,
    pub breadth_norm: f64,
    pub rao_stirling: f64,
    /// Mean clustering coefficient (V1 raw score).
    pub clustering: f64,
    /// Mean co-occurrence distance (V2 raw score).
    pub avg_distance: f64,
}

/// Per-patent weights on the secondary codes, keyed by patent id, in the order
/// of `PatentRecord::secondary_ipcs`.
pub type SecondaryWeights = BTreeMap<String, Vec<f64>>;

fn lookup<'a>(table: &'a EmbeddingTable, patent: &PatentRecord, code: &str) -> Result<&'a [f64], MetricsError> {
    table
        .get(code)
        .ok_or_else(|| MetricsError::MissingEmbedding { patent_id: patent.patent_id.clone(), code: code.to_string() })
}

/// Gathers the patent's main and secondary code vectors from `table`.
pub fn depth_inputs<'a>(
    patent: &'a PatentRecord,
    table: &'a EmbeddingTable,
    smoothing_k: u32,
) -> Result<DepthInputs<'a>, MetricsError> {
    let main = lookup(table, patent, &patent.main_ipc)?;
    let secondary = patent.secondary_ipcs.iter().map(|c| lookup(table, patent, c)).collect::<Result<Vec<_>, _>>()?;
    Ok(DepthInputs { patent_id: &patent.patent_id, main, secondary, smoothing_k })
}

/// `(D1, D2)` of one patent under the vectors in `table`.
pub fn depth_scores(
    patent: &PatentRecord,
    table: &EmbeddingTable,
    cfg: &MetricsConfig,
    weights: Option<&[f64]>,
) -> Result<(f64, f64), MetricsError> {
    let inputs = depth_inputs(patent, table, cfg.smoothing_k)?;
    let d2 = match (cfg.attention_weighted_depth2, weights) {
        (true, Some(w)) if w.len() == inputs.secondary.len() => depth2_weighted(&inputs, w),
        _ => depth2(&inputs),
    };
    Ok((depth1(&inputs), d2))
}

/// Depth pair for every patent, in corpus order.
pub fn corpus_depths(
    corpus: &CorpusData,
    table: &EmbeddingTable,
    cfg: &MetricsConfig,
    weights: Option<&SecondaryWeights>,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    corpus
        .records
        .par_iter()
        .map(|r| depth_scores(r, table, cfg, weights.and_then(|w| w.get(&r.patent_id)).map(Vec::as_slice)))
        .collect()
}

/// One vector per category of the patent at `level`: the table entry for the
/// category code when present, otherwise the normalized mean of the patent's
/// codes falling in that category.
pub fn category_vectors(
    patent: &PatentRecord,
    table: &EmbeddingTable,
    level: IpcLevel,
) -> Result<BTreeMap<String, Vec<f64>>, MetricsError> {
    let mut sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for code in patent.all_ipcs() {
        let cat = crate::corpus::ipc::truncate_code(code, level);
        if let Some(v) = table.get(&cat) {
            sums.insert(cat, v.to_vec());
            continue;
        }
        let v = lookup(table, patent, code)?;
        let acc = sums.entry(cat).or_insert_with(|| vec![0.0; v.len()]);
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    for (cat, v) in sums.iter_mut() {
        if !normalize_in_place(v) {
            return Err(MetricsError::MissingEmbedding { patent_id: patent.patent_id.clone(), code: cat.clone() });
        }
    }
    Ok(sums)
}

/// Rao-Stirling breadth of one patent with category vectors from `table`.
pub fn patent_rao_stirling(
    patent: &PatentRecord,
    table: &EmbeddingTable,
    level: IpcLevel,
) -> Result<f64, MetricsError> {
    let inputs = BreadthInputs::new(patent.patent_id.clone(), patent.category_counts(level));
    let vectors = category_vectors(patent, table, level)?;
    rao_stirling(&inputs, &vectors)
}

/// All per-patent metrics of the corpus, using `fused` for depth and Rao-Stirling.
pub fn compute_metrics(
    corpus: &CorpusData,
    fused: &EmbeddingTable,
    cfg: &MetricsConfig,
    weights: Option<&SecondaryWeights>,
) -> Result<Vec<PatentMetrics>, MetricsError> {
    cfg.validate()?;
    let net = build_cooc_network(corpus, cfg.ipc_level, cfg.min_support);
    let depths = corpus_depths(corpus, fused, cfg, weights)?;
    let per: Vec<(f64, f64, f64, f64)> = corpus
        .records
        .par_iter()
        .map(|r| {
            let raw = breadth_raw(&BreadthInputs::new(r.patent_id.clone(), r.category_counts(cfg.ipc_level)));
            let rs = patent_rao_stirling(r, fused, cfg.ipc_level)?;
            let cc = clustering_coefficient_score(r, &net);
            let ad = average_distance_score(r, &net, cfg.disconnect_penalty);
            Ok((raw, rs, cc, ad))
        })
        .collect::<Result<_, MetricsError>>()?;
    let raw: Vec<f64> = per.iter().map(|p| p.0).collect();
    let norm = breadth_normalized(&raw);
    Ok(corpus
        .records
        .iter()
        .zip(depths)
        .zip(per)
        .zip(norm)
        .map(|(((r, (d1, d2)), (raw, rs, cc, ad)), bn)| PatentMetrics {
            patent_id: r.patent_id.clone(),
            d1,
            d2,
            breadth_raw: raw,
            breadth_norm: bn,
            rao_stirling: rs,
            clustering: cc,
            avg_distance: ad,
        })
        .collect())
}
