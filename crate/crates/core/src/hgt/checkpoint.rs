//! Text checkpoint of [`EncoderParams`].
//!
//! ```text
//! #tci-encoder<TAB>1
//! #dim<TAB>16
//! #layers<TAB>2
//! #seed<TAB>42
//! #attention<TAB>joint
//! W<TAB>0<TAB>PatentIpc<TAB>…dim*dim floats, row-major…
//! a<TAB>0<TAB>PatentIpc<TAB>…dim floats…
//! ```
//!
//! Floats use shortest round-trip formatting, so a reloaded checkpoint
//! reproduces the encoder output bit for bit.

use std::io::{BufRead, Write};

use super::{AttentionScope, EncoderParams, HgtError};
use crate::hgraph::Relation;

const MAGIC: &str = "#tci-encoder";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(params: &EncoderParams, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}\t{VERSION}")?;
    writeln!(out, "#dim\t{}", params.dim())?;
    writeln!(out, "#layers\t{}", params.layers())?;
    writeln!(out, "#seed\t{}", params.seed)?;
    writeln!(out, "#attention\t{}", params.scope.as_str())?;
    for l in 0..params.layers() {
        for rel in Relation::ALL {
            write!(out, "W\t{l}\t{}", rel.as_str())?;
            for x in params.w(l, rel) {
                write!(out, "\t{x}")?;
            }
            writeln!(out)?;
            write!(out, "a\t{l}\t{}", rel.as_str())?;
            for x in params.a(l, rel) {
                write!(out, "\t{x}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> Result<EncoderParams, HgtError> {
    let mut header: Vec<(String, String)> = Vec::new();
    let mut body: Vec<(usize, String)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let (k, v) = line
                .split_once('\t')
                .ok_or(HgtError::Checkpoint { line: i + 1, reason: "header lines are `#key<TAB>value`".into() })?;
            header.push((k.to_string(), v.trim().to_string()));
        } else {
            body.push((i + 1, line));
        }
    }
    let get = |key: &str| -> Result<&str, HgtError> {
        header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or(HgtError::Checkpoint { line: 0, reason: format!("missing `{key}` header") })
    };
    let bad = |line: usize, reason: String| HgtError::Checkpoint { line, reason };
    if get(MAGIC)? != VERSION.to_string() {
        return Err(bad(1, format!("unsupported checkpoint version {}", get(MAGIC)?)));
    }
    let dim: usize = get("#dim")?.parse().map_err(|_| bad(0, "bad #dim".into()))?;
    let layers: usize = get("#layers")?.parse().map_err(|_| bad(0, "bad #layers".into()))?;
    let seed: u64 = get("#seed")?.parse().map_err(|_| bad(0, "bad #seed".into()))?;
    let scope = match get("#attention")? {
        "joint" => AttentionScope::Joint,
        "per_relation" => AttentionScope::PerRelation,
        other => return Err(bad(0, format!("unknown attention scope `{other}`"))),
    };
    let mut params = EncoderParams::zeros(dim, layers, seed, scope);
    let mut filled = vec![false; layers * super::RELATIONS * 2];
    for (line, text) in body {
        let cells: Vec<&str> = text.split('\t').collect();
        if cells.len() < 3 {
            return Err(bad(line, "expected `kind<TAB>layer<TAB>relation<TAB>values`".into()));
        }
        let layer: usize = cells[1].parse().map_err(|_| bad(line, "bad layer index".into()))?;
        if layer >= layers {
            return Err(bad(line, format!("layer {layer} out of range")));
        }
        let rel: Relation = cells[2].parse().map_err(|e| bad(line, e))?;
        let values = cells[3..]
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(line, e.to_string()))?;
        let (target, slot) = match cells[0] {
            "W" => (params.w_mut(layer, rel), 0),
            "a" => (params.a_mut(layer, rel), 1),
            other => return Err(bad(line, format!("unknown block `{other}`"))),
        };
        if values.len() != target.len() {
            return Err(HgtError::ParamShapeMismatch(format!(
                "line {line}: {} values, expected {}",
                values.len(),
                target.len()
            )));
        }
        target.copy_from_slice(&values);
        filled[(layer * super::RELATIONS + rel.index()) * 2 + slot] = true;
    }
    if filled.iter().any(|f| !f) {
        return Err(bad(0, "checkpoint is missing parameter blocks".into()));
    }
    Ok(params)
}
