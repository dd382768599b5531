//! Relation-aware attention message passing over the patent graph.
//!
//! One layer computes, for every node `i` with at least one neighbour,
//!
//! ```text
//! m_rj   = W_r h_j
//! s_rj   = a_r · tanh(m_rj)
//! α      = softmax of s over the typed neighbourhood of i
//! h'_i   = normalize( Σ_(r,j) α_rj m_rj )
//! ```
//!
//! Nodes without neighbours keep their input vector. The softmax runs jointly
//! over all `(relation, neighbour)` pairs by default; [`AttentionScope::PerRelation`]
//! normalizes within each relation instead.

mod checkpoint;
mod train;

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingKind, EmbeddingTable};
use crate::hgraph::{HeteroGraph, Relation};

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use train::{
    gradient_check, holdout_patent_ipc, link_auc, link_scores, train, GradCheckReport, LinkObjective, TrainConfig,
    TrainOutcome,
};

pub const RELATIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttentionScope {
    #[default]
    Joint,
    PerRelation,
}

impl AttentionScope {
    pub fn as_str(self) -> &'static str {
        match self {
            AttentionScope::Joint => "joint",
            AttentionScope::PerRelation => "per_relation",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HgtError {
    #[error("parameter shape mismatch: {0}")]
    ParamShapeMismatch(String),
    #[error("degenerate training input: {0}")]
    Degenerate(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("node `{0}` has no input vector")]
    MissingNode(String),
    #[error("malformed checkpoint at line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Per-layer, per-relation transform matrices and attention vectors.
///
/// All layers map `dim -> dim`. Storage is one flat vector laid out as
/// `[layer][relation][W (dim*dim, row-major) | a (dim)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    dim: usize,
    layers: usize,
    pub seed: u64,
    pub scope: AttentionScope,
    data: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(dim: usize, layers: usize, seed: u64, scope: AttentionScope) -> Self {
        EncoderParams { dim, layers, seed, scope, data: vec![0.0; layers * RELATIONS * (dim * dim + dim)] }
    }

    /// `W_r = I + noise`, `a_r ~ N(0, 1/dim)`.
    pub fn init(dim: usize, layers: usize, seed: u64, scope: AttentionScope, noise: f64) -> Self {
        let mut p = EncoderParams::zeros(dim, layers, seed, scope);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_noise = Normal::new(0.0, noise / (dim as f64).sqrt()).expect("finite std");
        let a_dist = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("finite std");
        for l in 0..layers {
            for r in 0..RELATIONS {
                let off = p.block_offset(l, r);
                for row in 0..dim {
                    for col in 0..dim {
                        let base = if row == col { 1.0 } else { 0.0 };
                        p.data[off + row * dim + col] = base + if noise > 0.0 { w_noise.sample(&mut rng) } else { 0.0 };
                    }
                }
                for k in 0..dim {
                    p.data[off + dim * dim + k] = a_dist.sample(&mut rng);
                }
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn block_offset(&self, layer: usize, relation: usize) -> usize {
        (layer * RELATIONS + relation) * (self.dim * self.dim + self.dim)
    }

    pub fn w(&self, layer: usize, relation: Relation) -> &[f64] {
        let off = self.block_offset(layer, relation.index());
        &self.data[off..off + self.dim * self.dim]
    }

    pub fn a(&self, layer: usize, relation: Relation) -> &[f64] {
        let off = self.block_offset(layer, relation.index()) + self.dim * self.dim;
        &self.data[off..off + self.dim]
    }

    pub fn w_mut(&mut self, layer: usize, relation: Relation) -> &mut [f64] {
        let off = self.block_offset(layer, relation.index());
        let d = self.dim;
        &mut self.data[off..off + d * d]
    }

    pub fn a_mut(&mut self, layer: usize, relation: Relation) -> &mut [f64] {
        let off = self.block_offset(layer, relation.index()) + self.dim * self.dim;
        let d = self.dim;
        &mut self.data[off..off + d]
    }

    /// Describes flat parameter `idx` as `(layer, relation, "W[r,c]" | "a[k]")`.
    pub fn describe(&self, idx: usize) -> (usize, Relation, String) {
        let block = self.dim * self.dim + self.dim;
        let b = idx / block;
        let within = idx % block;
        let (layer, rel) = (b / RELATIONS, Relation::ALL[b % RELATIONS]);
        let what = if within < self.dim * self.dim {
            format!("W[{},{}]", within / self.dim, within % self.dim)
        } else {
            format!("a[{}]", within - self.dim * self.dim)
        };
        (layer, rel, what)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Attention coefficients of one layer: for each node the `(relation,
/// neighbour, α)` triples in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerAttention {
    pub per_node: Vec<Vec<(Relation, usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub layers: Vec<LayerAttention>,
}

impl AttentionWeights {
    /// Largest deviation of any node's attention mass from its expected total
    /// (1 for joint scope, the number of present relations otherwise).
    pub fn max_normalization_error(&self, scope: AttentionScope) -> f64 {
        let mut worst: f64 = 0.0;
        for layer in &self.layers {
            for entries in &layer.per_node {
                if entries.is_empty() {
                    continue;
                }
                let total: f64 = entries.iter().map(|e| e.2).sum();
                let expected = match scope {
                    AttentionScope::Joint => 1.0,
                    AttentionScope::PerRelation => {
                        let mut rels: Vec<Relation> = entries.iter().map(|e| e.0).collect();
                        rels.dedup();
                        rels.len() as f64
                    }
                };
                worst = worst.max((total - expected).abs());
            }
        }
        worst
    }
}

/// Dense node features, row `i` belongs to graph node `i`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Features {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Features {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.data[i * d..(i + 1) * d]
    }

    pub fn from_table(graph: &HeteroGraph, table: &EmbeddingTable) -> Result<Self, HgtError> {
        let dim = table.dim();
        let mut data = Vec::with_capacity(graph.node_count() * dim);
        for n in graph.nodes() {
            let id = n.table_id();
            let v = table.get(&id).ok_or(HgtError::MissingNode(id))?;
            data.extend_from_slice(v);
        }
        Ok(Features { dim, data })
    }

    pub fn to_table(&self, graph: &HeteroGraph, kind: EmbeddingKind) -> Result<EmbeddingTable, HgtError> {
        let mut t = EmbeddingTable::new(self.dim, kind);
        for (i, n) in graph.nodes().iter().enumerate() {
            t.insert(n.table_id(), self.row(i).to_vec()).map_err(|e| HgtError::NonFinite(format!("{n}: {e}")))?;
        }
        Ok(t)
    }
}

/// Intermediates of one layer needed by the backward pass.
pub(crate) struct LayerCache {
    /// messages m[r][j] = W_r h_j, flat n*dim per relation
    pub m: Vec<Vec<f64>>,
    /// tanh(m)
    pub t: Vec<Vec<f64>>,
    /// attention per node in canonical neighbour order
    pub alpha: Vec<Vec<(usize, usize, f64)>>,
    /// norm of the pre-normalization aggregate (0 for pass-through nodes)
    pub z_norm: Vec<f64>,
    pub output: Features,
}

fn matvec(w: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (row, o) in out.iter_mut().enumerate() {
        *o = w[row * d..(row + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

#[allow(clippy::needless_range_loop)]
pub(crate) fn layer_forward(graph: &HeteroGraph, h: &Features, params: &EncoderParams, layer: usize) -> LayerCache {
    let n = graph.node_count();
    let d = h.dim;
    let mut m = vec![vec![0.0; n * d]; RELATIONS];
    let mut t = vec![vec![0.0; n * d]; RELATIONS];
    let mut score = vec![vec![0.0; n]; RELATIONS];
    for rel in Relation::ALL {
        let r = rel.index();
        let w = params.w(layer, rel);
        let a = params.a(layer, rel);
        for j in 0..n {
            if graph.neighbors(j, rel).is_empty() {
                continue;
            }
            let mj = &mut m[r][j * d..(j + 1) * d];
            matvec(w, h.row(j), mj);
            let tj = &mut t[r][j * d..(j + 1) * d];
            for (tk, mk) in tj.iter_mut().zip(mj.iter()) {
                *tk = mk.tanh();
            }
            score[r][j] = a.iter().zip(tj.iter()).map(|(x, y)| x * y).sum();
        }
    }

    let mut alpha = Vec::with_capacity(n);
    let mut z_norm = vec![0.0; n];
    let mut out = Features { dim: d, data: vec![0.0; n * d] };
    for i in 0..n {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for rel in Relation::ALL {
            for &j in graph.neighbors(i, rel) {
                entries.push((rel.index(), j, score[rel.index()][j]));
            }
        }
        if entries.is_empty() {
            out.row_mut(i).copy_from_slice(h.row(i));
            alpha.push(entries);
            continue;
        }
        softmax_entries(&mut entries, params.scope);
        let z = out.row_mut(i);
        for &(r, j, a) in &entries {
            for (zk, mk) in z.iter_mut().zip(&m[r][j * d..(j + 1) * d]) {
                *zk += a * mk;
            }
        }
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            for zk in z.iter_mut() {
                *zk /= norm;
            }
            z_norm[i] = norm;
        } else {
            // degenerate aggregate: fall back to pass-through
            z.copy_from_slice(h.row(i));
        }
        alpha.push(entries);
    }
    LayerCache { m, t, alpha, z_norm, output: out }
}

/// Replaces the score in each entry by its softmax weight.
fn softmax_entries(entries: &mut [(usize, usize, f64)], scope: AttentionScope) {
    match scope {
        AttentionScope::Joint => softmax_slice(entries),
        AttentionScope::PerRelation => {
            // entries are grouped by relation already
            let mut start = 0;
            while start < entries.len() {
                let r = entries[start].0;
                let end = start + entries[start..].iter().take_while(|e| e.0 == r).count();
                softmax_slice(&mut entries[start..end]);
                start = end;
            }
        }
    }
}

fn softmax_slice(entries: &mut [(usize, usize, f64)]) {
    let max = entries.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for e in entries.iter_mut() {
        e.2 = (e.2 - max).exp();
        sum += e.2;
    }
    for e in entries.iter_mut() {
        e.2 /= sum;
    }
}

fn check_shapes(graph: &HeteroGraph, h: &EmbeddingTable, params: &EncoderParams, layer: usize) -> Result<(), HgtError> {
    if h.dim() != params.dim() {
        return Err(HgtError::ParamShapeMismatch(format!(
            "input dim {} but parameters expect {}",
            h.dim(),
            params.dim()
        )));
    }
    if layer >= params.layers() {
        return Err(HgtError::ParamShapeMismatch(format!("layer {layer} out of range for {} layers", params.layers())));
    }
    if h.len() < graph.node_count() {
        return Err(HgtError::ParamShapeMismatch(format!(
            "{} input vectors for {} nodes",
            h.len(),
            graph.node_count()
        )));
    }
    Ok(())
}

/// Runs one message-passing layer over the whole graph.
pub fn hgt_layer_forward(
    graph: &HeteroGraph,
    h_in: &EmbeddingTable,
    params: &EncoderParams,
    layer: usize,
) -> Result<EmbeddingTable, HgtError> {
    check_shapes(graph, h_in, params, layer)?;
    let h = Features::from_table(graph, h_in)?;
    let cache = layer_forward(graph, &h, params, layer);
    cache.output.to_table(graph, EmbeddingKind::Structural)
}

pub(crate) fn forward_all(graph: &HeteroGraph, init: &Features, params: &EncoderParams) -> Vec<LayerCache> {
    let mut caches: Vec<LayerCache> = Vec::with_capacity(params.layers());
    for l in 0..params.layers() {
        let input = if l == 0 { init } else { &caches[l - 1].output };
        let c = layer_forward(graph, input, params, l);
        caches.push(c);
    }
    caches
}

/// Applies every layer and returns the final structural embeddings.
pub fn encode(graph: &HeteroGraph, init: &EmbeddingTable, params: &EncoderParams) -> Result<EmbeddingTable, HgtError> {
    Ok(encode_with_attention(graph, init, params)?.0)
}

pub fn encode_with_attention(
    graph: &HeteroGraph,
    init: &EmbeddingTable,
    params: &EncoderParams,
) -> Result<(EmbeddingTable, AttentionWeights), HgtError> {
    if params.layers() == 0 {
        return Err(HgtError::ParamShapeMismatch("encoder has no layers".into()));
    }
    check_shapes(graph, init, params, 0)?;
    let h0 = Features::from_table(graph, init)?;
    let caches = forward_all(graph, &h0, params);
    let attention = AttentionWeights {
        layers: caches
            .iter()
            .map(|c| LayerAttention {
                per_node: c
                    .alpha
                    .iter()
                    .map(|es| es.iter().map(|&(r, j, a)| (Relation::ALL[r], j, a)).collect())
                    .collect(),
            })
            .collect(),
    };
    let last = &caches.last().expect("at least one layer").output;
    if last.data.iter().any(|x| !x.is_finite()) {
        return Err(HgtError::NonFinite("encoder output".into()));
    }
    Ok((last.to_table(graph, EmbeddingKind::Structural)?, attention))
}
