//! Entropy weight method and the convergence index with its variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::min_max_normalize;

/// Tie-break added to ω1 when ω1 = ω2 ≠ 0.
pub const TIE_BREAK: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum IndexError {
    #[error("entropy weighting needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("indicator matrix is ragged or contains non-finite values")]
    InvalidMatrix,
    #[error("variant {0} is missing component {1}")]
    MissingComponent(Variant, &'static str),
    #[error("component {component} has {found} values, expected {expected}")]
    LengthMismatch { component: &'static str, found: usize, expected: usize },
}

/// Rows = patents, columns = indicators, each column min-max normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    rows: usize,
    cols: usize,
    /// Column-major values.
    data: Vec<f64>,
}

impl IndicatorMatrix {
    /// Normalizes each raw column to `[0, 1]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, IndexError> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows || c.iter().any(|v| !v.is_finite())) {
            return Err(IndexError::InvalidMatrix);
        }
        let data = columns.iter().flat_map(|c| min_max_normalize(c)).collect();
        Ok(Self { rows, cols: columns.len(), data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
}

/// Indicator weights; for the three-component index `(ω1, ω2, ω3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `ω1 > ω2`, or both zero.
    pub fn satisfies_constraint(&self) -> bool {
        match self.0.as_slice() {
            [w1, w2, ..] => w1 > w2 || (*w1 == 0.0 && *w2 == 0.0),
            _ => true,
        }
    }
}

/// Normalized entropy of each column.
pub fn column_entropies(matrix: &IndicatorMatrix) -> Result<Vec<f64>, IndexError> {
    let n = matrix.rows();
    if n < 2 {
        return Err(IndexError::TooFewRows(n));
    }
    let ln_n = (n as f64).ln();
    Ok((0..matrix.cols())
        .map(|j| {
            let col = matrix.column(j);
            let total: f64 = col.iter().sum();
            if !(total > 0.0) {
                return 1.0;
            }
            let h: f64 = col
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| {
                    let p = v / total;
                    p * p.ln()
                })
                .sum();
            (-h / ln_n).clamp(0.0, 1.0)
        })
        .collect())
}

/// Weights `(1 - E_j) / Σ (1 - E_j)`; uniform when every column is constant.
pub fn entropy_weights(matrix: &IndicatorMatrix) -> Result<WeightVector, IndexError> {
    let e = column_entropies(matrix)?;
    let div: Vec<f64> = e.iter().map(|e| 1.0 - e).collect();
    let total: f64 = div.iter().sum();
    if !(total > 0.0) {
        return Ok(WeightVector::uniform(e.len()));
    }
    Ok(WeightVector(div.iter().map(|d| d / total).collect()))
}

fn renormalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for x in w.iter_mut() {
            *x /= s;
        }
    }
}

/// Forces `ω1 > ω2` by swapping, or by a tie-break when they are equal and nonzero.
pub fn enforce_weight_constraint(w: &WeightVector) -> WeightVector {
    let mut v = w.0.clone();
    if v.len() < 2 {
        return WeightVector(v);
    }
    if v[1] > v[0] {
        v.swap(0, 1);
        renormalize(&mut v);
    }
    if v[0] == v[1] && v[0] != 0.0 {
        v[0] += TIE_BREAK;
        renormalize(&mut v);
    }
    WeightVector(v)
}

/// Weighted sum `Σ ω_j d_j`, clamped to `[0, 1]` against rounding.
pub fn compose_tci(d: &[f64], w: &WeightVector) -> f64 {
    debug_assert_eq!(d.len(), w.0.len());
    let s: f64 = d.iter().zip(&w.0).map(|(a, b)| a * b).sum();
    s.clamp(0.0, 1.0)
}

/// Solves constrained weights for a set of raw component columns.
pub fn solve_weights(columns: &[Vec<f64>]) -> Result<(IndicatorMatrix, WeightVector), IndexError> {
    let m = IndicatorMatrix::from_columns(columns)?;
    let w = enforce_weight_constraint(&entropy_weights(&m)?);
    Ok((m, w))
}

/// Row-wise composite of component columns.
pub fn compose_all(columns: &[Vec<f64>], w: &WeightVector) -> Vec<f64> {
    let rows = columns.first().map_or(0, Vec::len);
    (0..rows)
        .map(|i| {
            let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            compose_tci(&row, w)
        })
        .collect()
}

/// Index versions compared in the robustness analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
}

impl Variant {
    pub const ALL: [Variant; 8] =
        [Variant::V1, Variant::V2, Variant::V3, Variant::V4, Variant::V5, Variant::V6, Variant::V7, Variant::V8];

    pub fn label(self) -> &'static str {
        match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
            Variant::V4 => "v4",
            Variant::V5 => "v5",
            Variant::V6 => "v6",
            Variant::V7 => "v7",
            Variant::V8 => "v8",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Variant::V1 => "IPC co-occurrence: clustering coefficient",
            Variant::V2 => "IPC co-occurrence: average distance",
            Variant::V3 => "semantic depth only",
            Variant::V4 => "structural depth only",
            Variant::V5 => "structural depth + Shannon",
            Variant::V6 => "semantic depth + Shannon",
            Variant::V7 => "fused depth + Rao-Stirling",
            Variant::V8 => "fused depth + Shannon (TCI)",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label().to_uppercase())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant '{s}' (expected v1..v8)"))
    }
}

/// Per-patent raw inputs of the variants. Depth pairs are `(D1, D2)`.
#[derive(Debug, Clone, Default)]
pub struct VariantComponents {
    pub clustering: Option<Vec<f64>>,
    pub avg_distance: Option<Vec<f64>>,
    pub semantic_depth: Option<Vec<(f64, f64)>>,
    pub structural_depth: Option<Vec<(f64, f64)>>,
    pub fused_depth: Option<Vec<(f64, f64)>>,
    /// Normalized Shannon breadth.
    pub shannon: Option<Vec<f64>>,
    pub rao_stirling: Option<Vec<f64>>,
}

/// A computed variant column with the weights used (empty for V1, V2).
#[derive(Debug, Clone, PartialEq)]
pub struct VariantScores {
    pub variant: Variant,
    pub values: Vec<f64>,
    pub weights: WeightVector,
}

fn need<'a, T>(v: &'a Option<Vec<T>>, variant: Variant, name: &'static str) -> Result<&'a [T], IndexError> {
    v.as_deref().ok_or(IndexError::MissingComponent(variant, name))
}

fn unzip(d: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    d.iter().copied().unzip()
}

/// Scores of one variant. Weights come from the normalized component matrix and
/// are applied to the components as given. V1 to V7 are then min-max normalized
/// over the corpus; V8 is the index itself, `ω1·D1 + ω2·D2 + ω3·B`.
pub fn compute_variant(variant: Variant, c: &VariantComponents) -> Result<VariantScores, IndexError> {
    let weighted = |cols: Vec<Vec<f64>>| -> Result<(Vec<f64>, WeightVector), IndexError> {
        let (_, w) = solve_weights(&cols)?;
        Ok((compose_all(&cols, &w), w))
    };
    let (raw, weights) = match variant {
        Variant::V1 => (need(&c.clustering, variant, "clustering coefficient")?.to_vec(), WeightVector(vec![])),
        Variant::V2 => (need(&c.avg_distance, variant, "average distance")?.to_vec(), WeightVector(vec![])),
        Variant::V3 | Variant::V4 => {
            let (name, d) = if variant == Variant::V3 {
                ("semantic depth", &c.semantic_depth)
            } else {
                ("structural depth", &c.structural_depth)
            };
            let (d1, d2) = unzip(need(d, variant, name)?);
            weighted(vec![d1, d2])?
        }
        Variant::V5 | Variant::V6 | Variant::V8 => {
            let (name, d) = match variant {
                Variant::V5 => ("structural depth", &c.structural_depth),
                Variant::V6 => ("semantic depth", &c.semantic_depth),
                _ => ("fused depth", &c.fused_depth),
            };
            let (d1, d2) = unzip(need(d, variant, name)?);
            let b = need(&c.shannon, variant, "shannon breadth")?.to_vec();
            weighted(vec![d1, d2, b])?
        }
        Variant::V7 => {
            let (d1, d2) = unzip(need(&c.fused_depth, variant, "fused depth")?);
            let rs = need(&c.rao_stirling, variant, "rao-stirling breadth")?.to_vec();
            weighted(vec![d1, d2, rs])?
        }
    };
    let values = if variant == Variant::V8 { raw } else { min_max_normalize(&raw) };
    Ok(VariantScores { variant, values, weights })
}

/// Per-patent index components and variant scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceScores {
    pub patent_ids: Vec<String>,
    /// Raw component values.
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub tci: Vec<f64>,
    pub weights: WeightVector,
    pub variants: Vec<VariantScores>,
}

impl ConvergenceScores {
    pub fn variant(&self, v: Variant) -> Option<&[f64]> {
        self.variants.iter().find(|s| s.variant == v).map(|s| s.values.as_slice())
    }
}

/// Computes the index from fused depth and normalized Shannon breadth, plus every
/// requested variant whose components are available.
pub fn score_corpus(
    patent_ids: Vec<String>,
    components: &VariantComponents,
    variants: &[Variant],
) -> Result<ConvergenceScores, IndexError> {
    let n = patent_ids.len();
    let check = |name: &'static str, len: Option<usize>| match len {
        Some(found) if found != n => Err(IndexError::LengthMismatch { component: name, found, expected: n }),
        _ => Ok(()),
    };
    check("clustering", components.clustering.as_ref().map(Vec::len))?;
    check("avg_distance", components.avg_distance.as_ref().map(Vec::len))?;
    check("semantic_depth", components.semantic_depth.as_ref().map(Vec::len))?;
    check("structural_depth", components.structural_depth.as_ref().map(Vec::len))?;
    check("fused_depth", components.fused_depth.as_ref().map(Vec::len))?;
    check("shannon", components.shannon.as_ref().map(Vec::len))?;
    check("rao_stirling", components.rao_stirling.as_ref().map(Vec::len))?;

    let tci = compute_variant(Variant::V8, components)?;
    let (d1, d2) = unzip(components.fused_depth.as_deref().unwrap_or_default());
    let d3 = components.shannon.clone().unwrap_or_default();
    let mut out = Vec::new();
    for &v in variants {
        if v == Variant::V8 {
            out.push(tci.clone());
        } else {
            out.push(compute_variant(v, components)?);
        }
    }
    Ok(ConvergenceScores { patent_ids, d1, d2, d3, tci: tci.values, weights: tci.weights, variants: out })
}
