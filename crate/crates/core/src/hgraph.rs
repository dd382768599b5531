//! Heterogeneous patent graph with Patent, IPC, Topic and Applicant nodes.
//!
//! Nodes are stored sorted by `(type, key)` and edges by
//! `(relation, src, dst)`, so a graph built from the same corpus is identical
//! regardless of record order. Adjacency is undirected: both endpoints of an
//! edge see each other under the edge's relation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusData;
use crate::embed::{clamped_cosine, normalized, EmbeddingKind, EmbeddingTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    Patent,
    Ipc,
    Topic,
    Applicant,
}

impl NodeType {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Patent => "Patent",
            NodeType::Ipc => "IPC",
            NodeType::Topic => "Topic",
            NodeType::Applicant => "Applicant",
        }
    }
}

impl FromStr for NodeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Patent" => Ok(NodeType::Patent),
            "IPC" => Ok(NodeType::Ipc),
            "Topic" => Ok(NodeType::Topic),
            "Applicant" => Ok(NodeType::Applicant),
            other => Err(format!("unknown node type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    PatentIpc,
    IpcIpc,
    PatentTopic,
    ApplicantPatent,
}

impl Relation {
    pub const ALL: [Relation; 4] =
        [Relation::PatentIpc, Relation::IpcIpc, Relation::PatentTopic, Relation::ApplicantPatent];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::PatentIpc => "PatentIpc",
            Relation::IpcIpc => "IpcIpc",
            Relation::PatentTopic => "PatentTopic",
            Relation::ApplicantPatent => "ApplicantPatent",
        }
    }

    /// Endpoint types as `(src, dst)`.
    pub fn endpoints(self) -> (NodeType, NodeType) {
        match self {
            Relation::PatentIpc => (NodeType::Patent, NodeType::Ipc),
            Relation::IpcIpc => (NodeType::Ipc, NodeType::Ipc),
            Relation::PatentTopic => (NodeType::Patent, NodeType::Topic),
            Relation::ApplicantPatent => (NodeType::Applicant, NodeType::Patent),
        }
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| format!("unknown relation `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub node_type: NodeType,
    pub key: String,
}

impl NodeRef {
    pub fn new(node_type: NodeType, key: impl Into<String>) -> Self {
        NodeRef { node_type, key: key.into() }
    }

    /// Id used for this node in embedding tables: IPC nodes use the bare code,
    /// other nodes are prefixed with their lower-case type.
    pub fn table_id(&self) -> String {
        match self.node_type {
            NodeType::Ipc => self.key.clone(),
            NodeType::Patent => format!("patent:{}", self.key),
            NodeType::Topic => format!("topic:{}", self.key),
            NodeType::Applicant => format!("applicant:{}", self.key),
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node_type.as_str(), self.key)
    }
}

impl FromStr for NodeRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (t, key) = s.split_once(':').ok_or_else(|| format!("node `{s}` lacks a type prefix"))?;
        Ok(NodeRef::new(t.parse()?, key))
    }
}

/// Edge between two node indices of a [`HeteroGraph`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Edge {
    pub relation: Relation,
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// An edge expressed with node references, as produced by the IPC kNN rule.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRef {
    pub relation: Relation,
    pub src: NodeRef,
    pub dst: NodeRef,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GraphConfig {
    /// Neighbours selected per IPC node; 0 switches to threshold-only edges.
    pub knn_k: usize,
    /// IPC pairs with clamped cosine below this are never linked.
    pub sim_threshold: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { knn_k: 5, sim_threshold: 0.0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("no semantic embedding for IPC code `{0}`")]
    MissingEmbedding(String),
    #[error("invalid graph config: {0}")]
    InvalidConfig(String),
    #[error("malformed graph file at line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    nodes: Vec<NodeRef>,
    index: HashMap<NodeRef, usize>,
    edges: Vec<Edge>,
    /// adjacency[node][relation] = sorted neighbour indices
    adjacency: Vec<[Vec<usize>; 4]>,
}

/// Lower-cased, trimmed key for topic and applicant strings.
pub fn text_key(s: &str) -> String {
    s.trim().to_lowercase()
}

impl HeteroGraph {
    /// Assembles a graph from nodes and edges, canonicalizing order and
    /// dropping duplicate triples.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = NodeRef>,
        edges: impl IntoIterator<Item = EdgeRef>,
    ) -> Result<Self, GraphError> {
        let node_set: BTreeSet<NodeRef> = nodes.into_iter().collect();
        let nodes: Vec<NodeRef> = node_set.into_iter().collect();
        let index: HashMap<NodeRef, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut triples: BTreeMap<(Relation, usize, usize), f64> = BTreeMap::new();
        for e in edges {
            let (st, dt) = e.relation.endpoints();
            if e.src.node_type != st || e.dst.node_type != dt {
                return Err(GraphError::InvalidConfig(format!(
                    "edge {} -> {} does not type-check for {}",
                    e.src,
                    e.dst,
                    e.relation.as_str()
                )));
            }
            let lookup = |n: &NodeRef| {
                index
                    .get(n)
                    .copied()
                    .ok_or_else(|| GraphError::InvalidConfig(format!("edge endpoint {n} is not a node")))
            };
            let (mut s, mut d) = (lookup(&e.src)?, lookup(&e.dst)?);
            if s == d {
                continue;
            }
            if e.relation == Relation::IpcIpc && s > d {
                std::mem::swap(&mut s, &mut d);
            }
            let w = e.weight.clamp(0.0, 1.0);
            triples.entry((e.relation, s, d)).and_modify(|old| *old = old.max(w)).or_insert(w);
        }
        let edges: Vec<Edge> =
            triples.into_iter().map(|((relation, src, dst), weight)| Edge { relation, src, dst, weight }).collect();
        let mut g = HeteroGraph { adjacency: vec![Default::default(); nodes.len()], nodes, index, edges };
        g.rebuild_adjacency();
        Ok(g)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj: Vec<[Vec<usize>; 4]> = vec![Default::default(); self.nodes.len()];
        for e in &self.edges {
            adj[e.src][e.relation.index()].push(e.dst);
            adj[e.dst][e.relation.index()].push(e.src);
        }
        for lists in &mut adj {
            for l in lists.iter_mut() {
                l.sort_unstable();
                l.dedup();
            }
        }
        self.adjacency = adj;
    }

    /// Recomputes adjacency from the edge list and compares with the stored one.
    pub fn adjacency_is_consistent(&self) -> bool {
        let mut copy = self.clone();
        copy.rebuild_adjacency();
        copy.adjacency == self.adjacency
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, i: usize) -> &NodeRef {
        &self.nodes[i]
    }

    pub fn index_of(&self, node: &NodeRef) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn find(&self, node_type: NodeType, key: &str) -> Option<usize> {
        self.index.get(&NodeRef::new(node_type, key)).copied()
    }

    pub fn neighbors(&self, node: usize, relation: Relation) -> &[usize] {
        &self.adjacency[node][relation.index()]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].iter().map(Vec::len).sum()
    }

    pub fn nodes_of(&self, node_type: NodeType) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(move |(_, n)| n.node_type == node_type).map(|(i, _)| i)
    }

    pub fn edges_of(&self, relation: Relation) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.relation == relation)
    }

    pub fn count_nodes(&self, node_type: NodeType) -> usize {
        self.nodes_of(node_type).count()
    }

    pub fn count_edges(&self, relation: Relation) -> usize {
        self.edges_of(relation).count()
    }

    /// Copy of this graph without the listed edges (matched on relation and endpoints).
    pub fn without_edges(&self, removed: &[(Relation, usize, usize)]) -> HeteroGraph {
        let drop: BTreeSet<(Relation, usize, usize)> = removed.iter().copied().collect();
        let mut g = self.clone();
        g.edges.retain(|e| !drop.contains(&(e.relation, e.src, e.dst)));
        g.rebuild_adjacency();
        g
    }

    /// Writes the node manifest (`type<TAB>key`).
    pub fn write_nodes<W: Write>(&self, mut out: W) -> io::Result<()> {
        for n in &self.nodes {
            writeln!(out, "{}\t{}", n.node_type.as_str(), n.key)?;
        }
        Ok(())
    }

    /// Writes the edge list (`relation<TAB>src_type:src_key<TAB>dst_type:dst_key<TAB>weight`).
    pub fn write_edges<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.edges {
            writeln!(out, "{}\t{}\t{}\t{}", e.relation.as_str(), self.nodes[e.src], self.nodes[e.dst], e.weight)?;
        }
        Ok(())
    }

    pub fn read<R1: BufRead, R2: BufRead>(nodes: R1, edges: R2) -> Result<Self, GraphError> {
        let mut node_list = Vec::new();
        for (i, line) in nodes.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (t, key) = line
                .split_once('\t')
                .ok_or_else(|| GraphError::Format { line: i + 1, reason: "expected `type<TAB>key`".into() })?;
            let t: NodeType = t.parse().map_err(|reason| GraphError::Format { line: i + 1, reason })?;
            node_list.push(NodeRef::new(t, key));
        }
        let mut edge_list = Vec::new();
        for (i, line) in edges.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fmt_err = |reason: String| GraphError::Format { line: i + 1, reason };
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != 4 {
                return Err(fmt_err("expected 4 columns".into()));
            }
            edge_list.push(EdgeRef {
                relation: cells[0].parse().map_err(fmt_err)?,
                src: cells[1].parse().map_err(fmt_err)?,
                dst: cells[2].parse().map_err(fmt_err)?,
                weight: cells[3].parse().map_err(|e| fmt_err(format!("{e}")))?,
            });
        }
        HeteroGraph::from_parts(node_list, edge_list)
    }
}

/// IPC–IPC similarity edges: each code links to its `knn_k` most similar
/// codes (ties broken by code), pairs below `sim_threshold` are dropped, and
/// an edge exists if either endpoint selects the other. With `knn_k = 0`
/// every pair at or above the threshold is linked.
pub fn build_ipc_ipc_edges(
    codes: &[String],
    semantic: &EmbeddingTable,
    cfg: &GraphConfig,
) -> Result<Vec<EdgeRef>, GraphError> {
    if cfg.knn_k == 0 && !(cfg.sim_threshold > 0.0 && cfg.sim_threshold <= 1.0) {
        return Err(GraphError::InvalidConfig("knn_k must be >= 1 or sim_threshold in (0, 1]".into()));
    }
    let mut codes: Vec<&str> = codes.iter().map(String::as_str).collect();
    codes.sort_unstable();
    codes.dedup();
    let vecs: Vec<&[f64]> = codes
        .iter()
        .map(|c| semantic.get(c).ok_or_else(|| GraphError::MissingEmbedding(c.to_string())))
        .collect::<Result<_, _>>()?;

    let n = codes.len();
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        let mut cands: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, clamped_cosine(vecs[i], vecs[j])))
            .filter(|&(_, s)| s >= cfg.sim_threshold)
            .collect();
        // larger similarity first, then smaller index
        cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if cfg.knn_k > 0 {
            cands.truncate(cfg.knn_k);
        }
        for (j, s) in cands {
            pairs.insert((i.min(j), i.max(j)), s);
        }
    }
    Ok(pairs
        .into_iter()
        .map(|((a, b), w)| EdgeRef {
            relation: Relation::IpcIpc,
            src: NodeRef::new(NodeType::Ipc, codes[a]),
            dst: NodeRef::new(NodeType::Ipc, codes[b]),
            weight: w,
        })
        .collect())
}

/// Builds the patent graph. Every IPC code needs a semantic vector.
pub fn build_graph(
    corpus: &CorpusData,
    semantic: &EmbeddingTable,
    cfg: &GraphConfig,
) -> Result<HeteroGraph, GraphError> {
    let codes = corpus.distinct_ipcs();
    if let Some(missing) = codes.iter().find(|c| !semantic.contains(c)) {
        return Err(GraphError::MissingEmbedding(missing.clone()));
    }
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for code in &codes {
        nodes.push(NodeRef::new(NodeType::Ipc, code));
    }
    for r in &corpus.records {
        let p = NodeRef::new(NodeType::Patent, &r.patent_id);
        nodes.push(p.clone());
        for code in r.all_ipcs() {
            edges.push(EdgeRef {
                relation: Relation::PatentIpc,
                src: p.clone(),
                dst: NodeRef::new(NodeType::Ipc, code),
                weight: 1.0,
            });
        }
        for t in r.topics.iter().map(|t| text_key(t)).filter(|k| !k.is_empty()) {
            let tn = NodeRef::new(NodeType::Topic, t);
            nodes.push(tn.clone());
            edges.push(EdgeRef { relation: Relation::PatentTopic, src: p.clone(), dst: tn, weight: 1.0 });
        }
        for a in r.applicants.iter().map(|a| text_key(a)).filter(|k| !k.is_empty()) {
            let an = NodeRef::new(NodeType::Applicant, a);
            nodes.push(an.clone());
            edges.push(EdgeRef { relation: Relation::ApplicantPatent, src: an, dst: p.clone(), weight: 1.0 });
        }
    }
    edges.extend(build_ipc_ipc_edges(&codes, semantic, cfg)?);
    HeteroGraph::from_parts(nodes, edges)
}

/// Initial node features. IPC nodes take their semantic vectors; Topic and
/// Applicant nodes use `topic:<key>` / `applicant:<key>` entries when the
/// table has them. Patents get the normalized mean of their IPC vectors, and
/// text nodes without a vector the normalized mean of their patents.
pub fn initial_features(graph: &HeteroGraph, semantic: &EmbeddingTable) -> Result<EmbeddingTable, GraphError> {
    let dim = semantic.dim();
    let mut feats: Vec<Option<Vec<f64>>> = vec![None; graph.node_count()];
    for (i, n) in graph.nodes().iter().enumerate() {
        if n.node_type == NodeType::Ipc {
            let v = semantic.get(&n.key).ok_or_else(|| GraphError::MissingEmbedding(n.key.clone()))?;
            feats[i] = Some(v.to_vec());
        } else if matches!(n.node_type, NodeType::Topic | NodeType::Applicant) {
            feats[i] = semantic.get(&n.table_id()).map(<[f64]>::to_vec);
        }
    }
    let mean_of = |idx: &[usize], feats: &[Option<Vec<f64>>]| -> Option<Vec<f64>> {
        let mut acc = vec![0.0; dim];
        let mut any = false;
        for &j in idx {
            if let Some(v) = &feats[j] {
                any = true;
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
        }
        if any {
            normalized(&acc)
        } else {
            None
        }
    };
    for p in graph.nodes_of(NodeType::Patent) {
        let ipcs = graph.neighbors(p, Relation::PatentIpc);
        let v = mean_of(ipcs, &feats).or_else(|| ipcs.first().and_then(|&j| feats[j].clone()));
        feats[p] = v;
    }
    for (i, n) in graph.nodes().iter().enumerate() {
        if feats[i].is_none() {
            let rel = match n.node_type {
                NodeType::Topic => Relation::PatentTopic,
                _ => Relation::ApplicantPatent,
            };
            feats[i] = mean_of(graph.neighbors(i, rel), &feats);
        }
    }
    let mut table = EmbeddingTable::new(dim, EmbeddingKind::Semantic);
    for (i, n) in graph.nodes().iter().enumerate() {
        let v = feats[i].clone().unwrap_or_else(|| {
            // isolated text node: fixed basis direction
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        });
        table
            .insert(n.table_id(), v)
            .map_err(|e| GraphError::InvalidConfig(format!("initial feature for {n}: {e}")))?;
    }
    Ok(table)
}
