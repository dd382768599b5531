//! Link-prediction training for the encoder.
//!
//! Positives are the graph's PatentIpc edges, negatives are uniformly drawn
//! IPC nodes for the same patent. The loss is the mean logistic loss on dot
//! products of final-layer embeddings and parameters take plain gradient
//! steps. Gradients are computed analytically by backpropagating through
//! every layer; [`gradient_check`] compares them with central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{forward_all, AttentionScope, EncoderParams, Features, HgtError, RELATIONS};
use crate::embed::{dot, EmbeddingTable};
use crate::hgraph::{HeteroGraph, NodeType, Relation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives: usize,
    pub layers: usize,
    pub attention: AttentionScope,
    /// Std of the off-identity noise in the initial transforms (scaled by 1/sqrt(dim)).
    pub init_noise: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 0.05,
            negatives: 5,
            layers: 2,
            attention: AttentionScope::Joint,
            init_noise: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HgtError> {
        if self.epochs == 0 {
            return Err(HgtError::Degenerate("epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(HgtError::Degenerate("learning rate must be > 0".into()));
        }
        if self.layers == 0 {
            return Err(HgtError::Degenerate("encoder needs at least one layer".into()));
        }
        Ok(())
    }
}

/// Fixed set of scored `(patent, ipc)` node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkObjective {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl LinkObjective {
    /// All PatentIpc edges of `graph` with `per_positive` sampled negatives each.
    pub fn sample(graph: &HeteroGraph, per_positive: usize, rng: &mut ChaCha8Rng) -> Self {
        let positives: Vec<(usize, usize)> = graph.edges_of(Relation::PatentIpc).map(|e| (e.src, e.dst)).collect();
        let negatives = sample_negatives(graph, &positives, per_positive, rng);
        LinkObjective { positives, negatives }
    }
}

fn sample_negatives(
    graph: &HeteroGraph,
    positives: &[(usize, usize)],
    per_positive: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let ipcs: Vec<usize> = graph.nodes_of(NodeType::Ipc).collect();
    let mut out = Vec::with_capacity(positives.len() * per_positive);
    if ipcs.is_empty() {
        return out;
    }
    for &(p, _) in positives {
        let linked = graph.neighbors(p, Relation::PatentIpc);
        for _ in 0..per_positive {
            let mut q = ipcs[rng.random_range(0..ipcs.len())];
            for _ in 0..10 {
                if linked.binary_search(&q).is_err() {
                    break;
                }
                q = ipcs[rng.random_range(0..ipcs.len())];
            }
            out.push((p, q));
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss and, when requested, its gradient w.r.t. every parameter.
pub(crate) fn loss_and_grad(
    graph: &HeteroGraph,
    init: &Features,
    params: &EncoderParams,
    obj: &LinkObjective,
    want_grad: bool,
) -> (f64, Option<Vec<f64>>) {
    let n = graph.node_count();
    let d = params.dim();
    let caches = forward_all(graph, init, params);
    let h = &caches.last().expect("at least one layer").output;
    let total = (obj.positives.len() + obj.negatives.len()).max(1) as f64;

    let mut loss = 0.0;
    let mut g_h = vec![0.0; n * d];
    let push = |p: usize, q: usize, positive: bool, loss: &mut f64, g_h: &mut [f64]| {
        let s = dot(h.row(p), h.row(q));
        let ds = if positive {
            *loss += softplus(-s);
            -sigmoid(-s) / total
        } else {
            *loss += softplus(s);
            sigmoid(s) / total
        };
        if want_grad {
            for k in 0..d {
                g_h[p * d + k] += ds * h.row(q)[k];
                g_h[q * d + k] += ds * h.row(p)[k];
            }
        }
    };
    for &(p, q) in &obj.positives {
        push(p, q, true, &mut loss, &mut g_h);
    }
    for &(p, q) in &obj.negatives {
        push(p, q, false, &mut loss, &mut g_h);
    }
    loss /= total;
    if !want_grad {
        return (loss, None);
    }

    let mut scratch = EncoderParams::zeros(d, params.layers(), params.seed, params.scope);
    for l in (0..params.layers()).rev() {
        let input = if l == 0 { init } else { &caches[l - 1].output };
        let c = &caches[l];
        let mut g_in = vec![0.0; n * d];
        let mut dm = vec![vec![0.0; n * d]; RELATIONS];
        let mut ds_acc = vec![vec![0.0; n]; RELATIONS];
        let mut dz = vec![0.0; d];
        let mut dalpha: Vec<f64> = Vec::new();

        for i in 0..n {
            let g = &g_h[i * d..(i + 1) * d];
            let entries = &c.alpha[i];
            if entries.is_empty() || c.z_norm[i] == 0.0 {
                for k in 0..d {
                    g_in[i * d + k] += g[k];
                }
                continue;
            }
            let out = c.output.row(i);
            let og = dot(out, g);
            for k in 0..d {
                dz[k] = (g[k] - out[k] * og) / c.z_norm[i];
            }
            dalpha.clear();
            for &(r, j, a) in entries {
                let m = &c.m[r][j * d..(j + 1) * d];
                dalpha.push(dot(m, &dz));
                let dmj = &mut dm[r][j * d..(j + 1) * d];
                for k in 0..d {
                    dmj[k] += a * dz[k];
                }
            }
            // softmax backward, grouped by normalization scope
            let mut start = 0;
            while start < entries.len() {
                let end = match params.scope {
                    AttentionScope::Joint => entries.len(),
                    AttentionScope::PerRelation => {
                        let r = entries[start].0;
                        start + entries[start..].iter().take_while(|e| e.0 == r).count()
                    }
                };
                let mean: f64 = (start..end).map(|k| entries[k].2 * dalpha[k]).sum();
                for k in start..end {
                    let (r, j, a) = entries[k];
                    ds_acc[r][j] += a * (dalpha[k] - mean);
                }
                start = end;
            }
        }

        for rel in Relation::ALL {
            let r = rel.index();
            let a_r = params.a(l, rel);
            let w_r = params.w(l, rel);
            let (gw, ga) = split_block(&mut scratch, l, rel);
            for j in 0..n {
                if graph.neighbors(j, rel).is_empty() {
                    continue;
                }
                let t = &c.t[r][j * d..(j + 1) * d];
                let sj = ds_acc[r][j];
                let dmj = &mut dm[r][j * d..(j + 1) * d];
                if sj != 0.0 {
                    for k in 0..d {
                        ga[k] += sj * t[k];
                        dmj[k] += sj * a_r[k] * (1.0 - t[k] * t[k]);
                    }
                }
                let x = input.row(j);
                for row in 0..d {
                    let g_row = dmj[row];
                    if g_row == 0.0 {
                        continue;
                    }
                    for col in 0..d {
                        gw[row * d + col] += g_row * x[col];
                        g_in[j * d + col] += w_r[row * d + col] * g_row;
                    }
                }
            }
        }
        g_h = g_in;
    }
    (loss, Some(scratch.as_slice().to_vec()))
}

fn split_block(p: &mut EncoderParams, layer: usize, rel: Relation) -> (&mut [f64], &mut [f64]) {
    let d = p.dim();
    let off = (layer * RELATIONS + rel.index()) * (d * d + d);
    let block = &mut p.as_mut_slice()[off..off + d * d + d];
    block.split_at_mut(d * d)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub embeddings: EmbeddingTable,
    /// Loss on a fixed evaluation objective: entry 0 before training, entry
    /// `e` after epoch `e`.
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("non-empty history")
    }
}

/// Trains relation transforms and attention vectors on PatentIpc link
/// prediction. Deterministic for a fixed `cfg.seed`.
pub fn train(graph: &HeteroGraph, init: &EmbeddingTable, cfg: &TrainConfig) -> Result<TrainOutcome, HgtError> {
    cfg.validate()?;
    if graph.count_edges(Relation::PatentIpc) == 0 {
        return Err(HgtError::Degenerate("graph has no PatentIpc edges".into()));
    }
    let h0 = Features::from_table(graph, init)?;
    let mut params = EncoderParams::init(init.dim(), cfg.layers, cfg.seed, cfg.attention, cfg.init_noise);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9E37_79B9));
    let mut step_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7F4A_7C15));
    let eval = LinkObjective::sample(graph, cfg.negatives.max(1), &mut eval_rng);

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    history.push(loss_and_grad(graph, &h0, &params, &eval, false).0);
    for epoch in 0..cfg.epochs {
        let obj = LinkObjective::sample(graph, cfg.negatives, &mut step_rng);
        let (_, grad) = loss_and_grad(graph, &h0, &params, &obj, true);
        let grad = grad.expect("gradient requested");
        for (p, g) in params.as_mut_slice().iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        if !params.is_finite() {
            return Err(HgtError::NonFinite(format!("parameters after epoch {}", epoch + 1)));
        }
        let loss = loss_and_grad(graph, &h0, &params, &eval, false).0;
        if !loss.is_finite() {
            return Err(HgtError::NonFinite(format!("loss after epoch {}", epoch + 1)));
        }
        history.push(loss);
    }
    let embeddings = super::encode(graph, init, &params)?;
    Ok(TrainOutcome { params, embeddings, loss_history: history })
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(flat parameter index, analytic, numeric)` for every checked parameter.
    pub entries: Vec<(usize, f64, f64)>,
}

/// Denominator floor of the relative error, so parameters whose gradients are
/// both at rounding level do not register as failures.
const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients at the initial parameters with central
/// differences of step `epsilon`. Every parameter is checked when there are
/// at most 1,000; otherwise a seeded sample of 1,000.
pub fn gradient_check(
    graph: &HeteroGraph,
    init: &EmbeddingTable,
    cfg: &TrainConfig,
    epsilon: f64,
) -> Result<GradCheckReport, HgtError> {
    cfg.validate()?;
    let h0 = Features::from_table(graph, init)?;
    let params = EncoderParams::init(init.dim(), cfg.layers, cfg.seed, cfg.attention, cfg.init_noise);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(17));
    let obj = LinkObjective::sample(graph, cfg.negatives.max(1), &mut rng);
    let (_, grad) = loss_and_grad(graph, &h0, &params, &obj, true);
    let grad = grad.expect("gradient requested");

    let indices: Vec<usize> = if params.len() <= 1000 {
        (0..params.len()).collect()
    } else {
        let mut idx: Vec<usize> = (0..1000).map(|_| rng.random_range(0..params.len())).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    };
    let mut entries = Vec::with_capacity(indices.len());
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for idx in indices {
        let orig = probe.as_slice()[idx];
        probe.as_mut_slice()[idx] = orig + epsilon;
        let up = loss_and_grad(graph, &h0, &probe, &obj, false).0;
        probe.as_mut_slice()[idx] = orig - epsilon;
        let down = loss_and_grad(graph, &h0, &probe, &obj, false).0;
        probe.as_mut_slice()[idx] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(grad[idx], numeric));
        entries.push((idx, grad[idx], numeric));
    }
    Ok(GradCheckReport { max_rel_error: worst, entries })
}

/// Removes one PatentIpc edge from roughly `fraction` of the patents that have
/// at least two, returning the reduced graph and the removed `(patent, ipc)`
/// pairs. Node indices are unchanged.
pub fn holdout_patent_ipc(graph: &HeteroGraph, fraction: f64, seed: u64) -> (HeteroGraph, Vec<(usize, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = Vec::new();
    for p in graph.nodes_of(NodeType::Patent) {
        let ipcs = graph.neighbors(p, Relation::PatentIpc);
        if ipcs.len() < 2 {
            continue;
        }
        if rng.random::<f64>() < fraction {
            held.push((p, ipcs[rng.random_range(0..ipcs.len())]));
        }
    }
    let removed: Vec<(Relation, usize, usize)> = held.iter().map(|&(p, q)| (Relation::PatentIpc, p, q)).collect();
    (graph.without_edges(&removed), held)
}

/// Dot-product scores of node pairs under `embeddings`.
pub fn link_scores(graph: &HeteroGraph, embeddings: &EmbeddingTable, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(p, q)| {
            let a = embeddings.get(&graph.node(p).table_id());
            let b = embeddings.get(&graph.node(q).table_id());
            match (a, b) {
                (Some(a), Some(b)) => dot(a, b),
                _ => f64::NAN,
            }
        })
        .collect()
}

/// Probability that a random positive outscores a random negative (ties count half).
pub fn link_auc(positive: &[f64], negative: &[f64]) -> f64 {
    if positive.is_empty() || negative.is_empty() {
        return f64::NAN;
    }
    let mut all: Vec<(f64, bool)> =
        positive.iter().map(|&s| (s, true)).chain(negative.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // average ranks over ties, then Mann-Whitney U
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let np = positive.len() as f64;
    let nn = negative.len() as f64;
    (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn)
}
