//! Shannon diversity and Rao-Stirling breadth over IPC category shares.

use std::collections::BTreeMap;

use crate::embed::clamped_cosine;

use super::MetricsError;

/// Category counts of one patent at the configured IPC level.
#[derive(Debug, Clone, PartialEq)]
pub struct BreadthInputs {
    pub patent_id: String,
    /// Category code and its count (each count ≥ 1).
    pub counts: Vec<(String, usize)>,
}

impl BreadthInputs {
    pub fn new(patent_id: impl Into<String>, counts: BTreeMap<String, usize>) -> Self {
        Self { patent_id: patent_id.into(), counts: counts.into_iter().collect() }
    }

    pub fn n_categories(&self) -> usize {
        self.counts.len()
    }

    /// Shares `p_i = n_i / Σ n`.
    pub fn proportions(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().map(|c| c.1).sum();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|c| c.1 as f64 / total as f64).collect()
    }
}

/// Shannon entropy of count shares, in nats.
pub fn shannon_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

pub fn breadth_raw(inputs: &BreadthInputs) -> f64 {
    let counts: Vec<usize> = inputs.counts.iter().map(|c| c.1).collect();
    shannon_entropy(&counts)
}

/// Min-max rescaling to `[0, 1]`; a constant input maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
}

/// Corpus-level normalization of raw Shannon breadth.
pub fn breadth_normalized(raw_values: &[f64]) -> Vec<f64> {
    min_max_normalize(raw_values)
}

/// `Σ_{i≠j} p_i p_j (1 - s(v_i, v_j))` over ordered category pairs.
pub fn rao_stirling(inputs: &BreadthInputs, vectors: &BTreeMap<String, Vec<f64>>) -> Result<f64, MetricsError> {
    let mut vs = Vec::with_capacity(inputs.counts.len());
    for (code, _) in &inputs.counts {
        let v = vectors.get(code).ok_or_else(|| MetricsError::MissingEmbedding {
            patent_id: inputs.patent_id.clone(),
            code: code.clone(),
        })?;
        vs.push(v.as_slice());
    }
    let p = inputs.proportions();
    let mut rs = 0.0;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            rs += 2.0 * p[i] * p[j] * (1.0 - clamped_cosine(vs[i], vs[j]));
        }
    }
    Ok(rs.max(0.0))
}
