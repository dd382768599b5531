//! Embedding tables and the vector math shared by every depth computation.
//!
//! File format (UTF-8 TSV): the first line is `#dim<TAB><n>`; every other
//! non-comment line is `<id><TAB><f_1>…<TAB><f_n>`. Further lines starting
//! with `#` (for example `#model <id>`) are ignored. Floats are written in
//! shortest round-trip decimal form.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Semantic,
    Structural,
    Fused,
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingKind::Semantic => "semantic",
            EmbeddingKind::Structural => "structural",
            EmbeddingKind::Fused => "fused",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("vector `{id}` has {found} components, expected {expected}")]
    DimensionMismatch { id: String, found: usize, expected: usize },
    #[error("vector `{0}` has zero norm")]
    ZeroVector(String),
    #[error("duplicate embedding id `{0}`")]
    DuplicateId(String),
    #[error("embedding ids differ between tables: {}", .0.join(", "))]
    IdSetMismatch(Vec<String>),
    #[error("malformed embedding file at line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Maps ids to unit-norm vectors of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    kind: EmbeddingKind,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, kind: EmbeddingKind) -> Self {
        EmbeddingTable { dim, kind, vectors: BTreeMap::new() }
    }

    /// Builds a table, normalizing every vector.
    pub fn from_vectors<I, S>(dim: usize, kind: EmbeddingKind, items: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut t = EmbeddingTable::new(dim, kind);
        for (id, v) in items {
            t.insert(id.into(), v)?;
        }
        Ok(t)
    }

    /// Inserts a vector after normalizing it to unit length.
    pub fn insert(&mut self, id: String, mut v: Vec<f64>) -> Result<(), EmbedError> {
        if v.len() != self.dim {
            return Err(EmbedError::DimensionMismatch { id, found: v.len(), expected: self.dim });
        }
        if self.vectors.contains_key(&id) {
            return Err(EmbedError::DuplicateId(id));
        }
        if !normalize_in_place(&mut v) {
            return Err(EmbedError::ZeroVector(id));
        }
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: EmbeddingKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    /// Ids in sorted order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Sub-table over `ids`; fails listing any id not present.
    pub fn restrict<'a, I>(&self, ids: I) -> Result<EmbeddingTable, EmbedError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut out = EmbeddingTable::new(self.dim, self.kind);
        let mut missing = Vec::new();
        for id in ids {
            match self.vectors.get(id) {
                Some(v) => {
                    out.vectors.insert(id.to_string(), v.clone());
                }
                None => missing.push(id.to_string()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            missing.sort();
            Err(EmbedError::IdSetMismatch(missing))
        }
    }

    pub fn read<R: BufRead>(reader: R, kind: EmbeddingKind) -> Result<Self, EmbedError> {
        let mut lines = reader.lines().enumerate();
        let dim = loop {
            let Some((i, line)) = lines.next() else {
                return Err(EmbedError::Format { line: 1, reason: "missing `#dim` header".into() });
            };
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let rest = line.strip_prefix("#dim").ok_or_else(|| EmbedError::Format {
                line: i + 1,
                reason: "first line must be `#dim<TAB><n>`".into(),
            })?;
            let dim: usize = rest
                .trim()
                .parse()
                .map_err(|_| EmbedError::Format { line: i + 1, reason: format!("bad dimension `{}`", rest.trim()) })?;
            if dim == 0 {
                return Err(EmbedError::Format { line: i + 1, reason: "dimension must be positive".into() });
            }
            break dim;
        };
        let mut table = EmbeddingTable::new(dim, kind);
        for (i, line) in lines {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cells = line.split('\t');
            let id = cells.next().unwrap_or_default().to_string();
            let values = cells
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbedError::Format { line: i + 1, reason: format!("vector `{id}`: {e}") })?;
            if values.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::Format {
                    line: i + 1,
                    reason: format!("vector `{id}` has non-finite components"),
                });
            }
            table.insert(id, values)?;
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "#dim\t{}", self.dim)?;
        for (id, v) in &self.vectors {
            out.write_all(id.as_bytes())?;
            for x in v {
                write!(out, "\t{x}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)
    }
}

/// Loads an embedding table file, renormalizing every row.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, EmbedError> {
    load_embeddings_as(path, EmbeddingKind::Semantic)
}

pub fn load_embeddings_as(path: &Path, kind: EmbeddingKind) -> Result<EmbeddingTable, EmbedError> {
    EmbeddingTable::read(BufReader::new(fs::File::open(path)?), kind)
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length. Vectors already within 1e-12 of unit length are
/// left untouched so that normalization is idempotent bit for bit. Returns
/// false for zero or non-finite vectors.
pub fn normalize_in_place(v: &mut [f64]) -> bool {
    let n = norm(v);
    if !(n.is_finite() && n > 0.0) {
        return false;
    }
    if (n - 1.0).abs() > 1e-12 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    true
}

pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let mut out = v.to_vec();
    normalize_in_place(&mut out).then_some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cosine similarity of a zero vector")]
pub struct ZeroVectorError;

/// Cosine similarity, clamped into [-1, 1] against rounding.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, ZeroVectorError> {
    debug_assert_eq!(u.len(), v.len());
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(ZeroVectorError);
    }
    if u == v {
        return Ok(1.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Negative similarities map to zero so that `1 - s` stays in [0, 1].
pub fn clamp_similarity(s: f64) -> f64 {
    s.clamp(0.0, 1.0)
}

/// Clamped cosine of two vectors; zero vectors count as dissimilar.
pub fn clamped_cosine(u: &[f64], v: &[f64]) -> f64 {
    cosine_similarity(u, v).map(clamp_similarity).unwrap_or(0.0)
}

/// Concatenates structural and semantic vectors per id. Each half is unit
/// normalized before concatenation and the result is normalized again, so
/// the two halves contribute equally.
pub fn fuse_embeddings(structural: &EmbeddingTable, semantic: &EmbeddingTable) -> Result<EmbeddingTable, EmbedError> {
    let mut missing: Vec<String> = structural
        .ids()
        .filter(|id| !semantic.contains(id))
        .chain(semantic.ids().filter(|id| !structural.contains(id)))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(EmbedError::IdSetMismatch(missing));
    }
    let dim = structural.dim + semantic.dim;
    let mut out = EmbeddingTable::new(dim, EmbeddingKind::Fused);
    for (id, s) in structural.iter() {
        let x = semantic.get(id).expect("id sets checked");
        let s = normalized(s).ok_or_else(|| EmbedError::ZeroVector(id.to_string()))?;
        let x = normalized(x).ok_or_else(|| EmbedError::ZeroVector(id.to_string()))?;
        let mut v = Vec::with_capacity(dim);
        v.extend_from_slice(&s);
        v.extend_from_slice(&x);
        out.insert(id.to_string(), v)?;
    }
    Ok(out)
}
