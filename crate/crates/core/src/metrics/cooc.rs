//! IPC co-occurrence network and the two baseline scores built on it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::corpus::ipc::IpcLevel;
use crate::corpus::{CorpusData, PatentRecord};

const UNREACHABLE: u32 = u32::MAX;

/// Undirected co-classification graph on IPC categories.
#[derive(Debug, Clone)]
pub struct CoocNetwork {
    level: IpcLevel,
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
    distances: Vec<u32>,
    clustering: Vec<f64>,
    diameter: u32,
}

impl CoocNetwork {
    /// Builds the network from explicit node and edge lists. Duplicate edges and
    /// self-loops are ignored; edge endpoints must be listed in `nodes`.
    pub fn from_edges<S: AsRef<str>>(level: IpcLevel, nodes: &[S], edges: &[(S, S)]) -> Self {
        let set: BTreeSet<String> = nodes.iter().map(|n| n.as_ref().to_string()).collect();
        let nodes: Vec<String> = set.into_iter().collect();
        let index: BTreeMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
        for (a, b) in edges {
            let (Some(&i), Some(&j)) = (index.get(a.as_ref()), index.get(b.as_ref())) else {
                panic!("edge endpoint not among nodes: {} - {}", a.as_ref(), b.as_ref());
            };
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
        let adjacency: Vec<Vec<usize>> = adj.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut net =
            CoocNetwork { level, nodes, index, adjacency, distances: Vec::new(), clustering: Vec::new(), diameter: 0 };
        net.compute_distances();
        net.compute_clustering();
        net
    }

    fn compute_distances(&mut self) {
        let n = self.nodes.len();
        let mut dist = vec![UNREACHABLE; n * n];
        let mut queue = VecDeque::new();
        let mut diameter = 0;
        for s in 0..n {
            let row = &mut dist[s * n..(s + 1) * n];
            row[s] = 0;
            queue.clear();
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                let du = row[u];
                for &v in &self.adjacency[u] {
                    if row[v] == UNREACHABLE {
                        row[v] = du + 1;
                        diameter = diameter.max(du + 1);
                        queue.push_back(v);
                    }
                }
            }
        }
        self.distances = dist;
        self.diameter = diameter;
    }

    fn compute_clustering(&mut self) {
        self.clustering = (0..self.nodes.len())
            .map(|u| {
                let nb = &self.adjacency[u];
                let k = nb.len();
                if k < 2 {
                    return 0.0;
                }
                let mut links = 0usize;
                for (a, &i) in nb.iter().enumerate() {
                    for &j in &nb[a + 1..] {
                        if self.adjacency[i].binary_search(&j).is_ok() {
                            links += 1;
                        }
                    }
                }
                links as f64 / (k * (k - 1) / 2) as f64
            })
            .collect();
    }

    pub fn level(&self) -> IpcLevel {
        self.level
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.adjacency[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    pub fn neighbors(&self, code: &str) -> Vec<&str> {
        match self.index.get(code) {
            Some(&i) => self.adjacency[i].iter().map(|&j| self.nodes[j].as_str()).collect(),
            None => Vec::new(),
        }
    }

    /// Hop distance, or `None` when either code is absent or the pair is disconnected.
    pub fn distance(&self, a: &str, b: &str) -> Option<u32> {
        let (&i, &j) = (self.index.get(a)?, self.index.get(b)?);
        let d = self.distances[i * self.nodes.len() + j];
        (d != UNREACHABLE).then_some(d)
    }

    pub fn clustering_coefficient(&self, code: &str) -> Option<f64> {
        self.index.get(code).map(|&i| self.clustering[i])
    }

    /// Largest finite shortest-path length.
    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    pub fn symmetric(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(i, nb)| nb.iter().all(|&j| self.adjacency[j].binary_search(&i).is_ok()))
    }
}

/// Edges between categories co-listed on at least `min_support` patents.
pub fn build_cooc_network(corpus: &CorpusData, level: IpcLevel, min_support: usize) -> CoocNetwork {
    let mut nodes = BTreeSet::new();
    let mut support: BTreeMap<(String, String), usize> = BTreeMap::new();
    for rec in &corpus.records {
        let cats: Vec<String> = rec.categories(level).into_iter().collect();
        for (a, x) in cats.iter().enumerate() {
            for y in &cats[a + 1..] {
                *support.entry((x.clone(), y.clone())).or_default() += 1;
            }
        }
        nodes.extend(cats);
    }
    let edges: Vec<(String, String)> =
        support.into_iter().filter(|(_, c)| *c >= min_support.max(1)).map(|(k, _)| k).collect();
    let nodes: Vec<String> = nodes.into_iter().collect();
    CoocNetwork::from_edges(level, &nodes, &edges)
}

/// Mean local clustering coefficient over the patent's distinct categories.
pub fn clustering_coefficient_score(patent: &PatentRecord, net: &CoocNetwork) -> f64 {
    let cats = patent.categories(net.level());
    if cats.is_empty() {
        return 0.0;
    }
    let sum: f64 = cats.iter().map(|c| net.clustering_coefficient(c).unwrap_or(0.0)).sum();
    sum / cats.len() as f64
}

/// Mean shortest-path length over unordered pairs of the patent's categories.
/// Disconnected or unknown pairs count as `penalty`, defaulting to diameter + 1.
pub fn average_distance_score(patent: &PatentRecord, net: &CoocNetwork, penalty: Option<f64>) -> f64 {
    let cats: Vec<String> = patent.categories(net.level()).into_iter().collect();
    if cats.len() < 2 {
        return 0.0;
    }
    let penalty = penalty.unwrap_or(net.diameter() as f64 + 1.0);
    let (mut sum, mut count) = (0.0, 0usize);
    for (a, x) in cats.iter().enumerate() {
        for y in &cats[a + 1..] {
            sum += net.distance(x, y).map_or(penalty, f64::from);
            count += 1;
        }
    }
    sum / count as f64
}
