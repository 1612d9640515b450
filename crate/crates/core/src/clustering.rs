//! Weighted undirected similarity graphs and Chinese Whispers clustering.
//!
//! Chinese Whispers starts with every node in its own class and repeatedly
//! sweeps the nodes in random order; each node adopts the class carrying the
//! largest summed edge weight among its neighbours. Sweeps stop once nothing
//! changes or after `max_iterations`.
//!
//! Randomness is made independent of node insertion order: the visit order is
//! a shuffle of the nodes sorted by id, initial classes are id ranks, and tied
//! candidates are ordered by class before the random pick. Two graphs that
//! differ only in insertion order therefore produce the same memberships.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::embeddings::{dot, norm};
use crate::error::{Error, Result};
use crate::seed;
use crate::sparse::SparseVector;

pub const DEFAULT_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Default)]
pub struct WeightedGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    edges: usize,
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut g = Self::new();
        for id in ids {
            g.add_node(id)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, id: impl Into<String>) -> Result<usize> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateNode(id));
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        self.adjacency.push(Vec::new());
        Ok(i)
    }

    /// Adds the undirected edge `{from, to}`. Self-loops, non-positive weights
    /// and repeated edges are rejected.
    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) -> Result<()> {
        let bad = |reason| Error::InvalidEdge {
            from,
            to,
            weight,
            reason,
        };
        if from >= self.ids.len() || to >= self.ids.len() {
            return Err(bad("node index out of range"));
        }
        if from == to {
            return Err(bad("self-loop"));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(bad("weight must be positive and finite"));
        }
        if self.adjacency[from].iter().any(|&(n, _)| n == to) {
            return Err(bad("duplicate edge"));
        }
        self.adjacency[from].push((to, weight));
        self.adjacency[to].push((from, weight));
        self.edges += 1;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a].iter().find(|&&(n, _)| n == b).map(|&(_, w)| w)
    }
}

/// Which vector pairs become edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeRule {
    /// cosine >= threshold; threshold must be positive.
    AtLeast(f64),
    /// cosine > 0.
    Positive,
}

impl EdgeRule {
    pub fn admits(self, cosine: f64) -> bool {
        match self {
            EdgeRule::AtLeast(t) => cosine >= t,
            EdgeRule::Positive => cosine > 0.0,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            EdgeRule::AtLeast(t) if t.is_nan() || t <= 0.0 => {
                Err(Error::Config(format!("edge threshold must be positive, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

/// Anything with a dot product and a Euclidean norm.
pub trait CosineVector {
    fn dot_with(&self, other: &Self) -> f64;
    fn norm(&self) -> f64;
}

impl CosineVector for Vec<f64> {
    fn dot_with(&self, other: &Self) -> f64 {
        dot(self, other)
    }

    fn norm(&self) -> f64 {
        norm(self)
    }
}

impl CosineVector for &[f64] {
    fn dot_with(&self, other: &Self) -> f64 {
        dot(self, other)
    }

    fn norm(&self) -> f64 {
        norm(self)
    }
}

impl CosineVector for SparseVector {
    fn dot_with(&self, other: &Self) -> f64 {
        self.dot(other)
    }

    fn norm(&self) -> f64 {
        SparseVector::norm(self)
    }
}

/// Pairwise graph over `vectors`: edge iff the pair's cosine satisfies `rule`,
/// weighted by that cosine. Zero vectors are rejected.
pub fn build_similarity_graph<V: CosineVector>(vectors: &[(String, V)], rule: EdgeRule) -> Result<WeightedGraph> {
    rule.validate()?;
    let mut graph = WeightedGraph::with_nodes(vectors.iter().map(|(id, _)| id.clone()))?;
    let norms: Vec<f64> = vectors.iter().map(|(_, v)| v.norm()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroVector(vectors[i].0.clone()));
    }
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let c = (vectors[i].1.dot_with(&vectors[j].1) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            if rule.admits(c) {
                graph.add_edge(i, j, c)?;
            }
        }
    }
    Ok(graph)
}

/// Positive-cosine graph over non-negative sparse vectors, found through an
/// inverted index so only pairs sharing a coordinate are scored. Zero vectors
/// are allowed and become isolated nodes.
pub fn build_sparse_positive_graph(vectors: &[(String, SparseVector)]) -> Result<WeightedGraph> {
    let mut graph = WeightedGraph::with_nodes(vectors.iter().map(|(id, _)| id.clone()))?;
    let norms: Vec<f64> = vectors.iter().map(|(_, v)| v.norm()).collect();
    let mut postings: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, (_, v)) in vectors.iter().enumerate() {
        for &(c, _) in v.entries() {
            postings.entry(c).or_default().push(i);
        }
    }
    let mut candidates: Vec<usize> = Vec::new();
    for i in 0..vectors.len() {
        candidates.clear();
        for &(c, _) in vectors[i].1.entries() {
            candidates.extend(postings[&c].iter().copied().filter(|&j| j > i));
        }
        candidates.sort_unstable();
        candidates.dedup();
        for &j in &candidates {
            let c = (vectors[i].1.dot(&vectors[j].1) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            if c > 0.0 {
                graph.add_edge(i, j, c)?;
            }
        }
    }
    Ok(graph)
}

/// A partition of graph nodes. Cluster ids are dense, numbered by first
/// appearance in node order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    labels: Vec<usize>,
    num_clusters: usize,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct ClusterRecord<'a> {
    node: &'a str,
    cluster: usize,
}

impl Clustering {
    /// Renumbers arbitrary labels densely by first appearance.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|l| {
                let next = remap.len();
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        Clustering {
            num_clusters: remap.len(),
            labels,
            iterations: 0,
            converged: true,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Sweeps actually performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Whether the last sweep changed nothing.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Members of each cluster, in node order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (node, &c) in self.labels.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    /// One `{"node": id, "cluster": c}` line per node.
    pub fn write_jsonl<W: Write>(&self, graph: &WeightedGraph, mut out: W) -> std::io::Result<()> {
        for (node, &cluster) in self.labels.iter().enumerate() {
            let record = ClusterRecord {
                node: graph.id(node),
                cluster,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn chinese_whispers(graph: &WeightedGraph, max_iterations: usize, seed: u64) -> Clustering {
    let n = graph.node_count();
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by(|&a, &b| graph.id(a).cmp(graph.id(b)));
    let mut rank = vec![0usize; n];
    for (r, &node) in by_id.iter().enumerate() {
        rank[node] = r;
    }
    let adjacency: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|node| {
            let mut adj = graph.neighbors(node).to_vec();
            adj.sort_by_key(|&(m, _)| rank[m]);
            adj
        })
        .collect();

    let mut labels = rank.clone();
    let mut rng = seed::rng(seed);
    let mut order = by_id.clone();
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    let mut ties: Vec<usize> = Vec::new();
    let mut iterations = 0;
    let mut converged = n == 0;

    while iterations < max_iterations {
        iterations += 1;
        order.copy_from_slice(&by_id);
        order.shuffle(&mut rng);
        let mut changed = false;
        for &node in &order {
            if adjacency[node].is_empty() {
                continue;
            }
            scores.clear();
            for &(m, w) in &adjacency[node] {
                *scores.entry(labels[m]).or_insert(0.0) += w;
            }
            let best = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
            ties.clear();
            ties.extend(scores.iter().filter(|&(_, &s)| s == best).map(|(&l, _)| l));
            let chosen = if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.random_range(0..ties.len())]
            };
            if labels[node] != chosen {
                labels[node] = chosen;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }

    let mut clustering = Clustering::from_labels(&labels);
    clustering.iterations = iterations;
    clustering.converged = converged;
    clustering
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> WeightedGraph {
        let mut g = WeightedGraph::with_nodes(["a", "b", "c", "d", "e", "f"]).unwrap();
        for (x, y) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            g.add_edge(x, y, 1.0).unwrap();
        }
        g
    }

    #[test]
    fn graph_rejects_invalid_edges() {
        let mut g = WeightedGraph::with_nodes(["a", "b"]).unwrap();
        assert!(g.add_edge(0, 0, 1.0).is_err());
        assert!(g.add_edge(0, 1, 0.0).is_err());
        assert!(g.add_edge(0, 1, -0.5).is_err());
        assert!(g.add_edge(0, 2, 1.0).is_err());
        g.add_edge(0, 1, 0.5).unwrap();
        assert!(g.add_edge(1, 0, 0.5).is_err());
        assert_eq!(g.weight(1, 0), Some(0.5));
        assert!(WeightedGraph::with_nodes(["a", "a"]).is_err());
    }

    #[test]
    fn orthogonal_pair_has_no_edge() {
        let v = vec![("x".to_string(), vec![1.0, 0.0]), ("y".to_string(), vec![0.0, 1.0])];
        let g = build_similarity_graph(&v, EdgeRule::AtLeast(0.4)).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 0));
    }

    #[test]
    fn threshold_selects_single_edge() {
        // cos((1,0),(1,.1)) = 0.995; the others are 0 and 0.0995
        let v = vec![
            ("p".to_string(), vec![1.0, 0.0]),
            ("q".to_string(), vec![1.0, 0.1]),
            ("r".to_string(), vec![0.0, 1.0]),
        ];
        let g = build_similarity_graph(&v, EdgeRule::AtLeast(0.4)).unwrap();
        assert_eq!(g.edge_count(), 1);
        let w = g.weight(0, 1).unwrap();
        assert!((w - 1.0 / 1.01f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_named_in_error() {
        let v = vec![("ok".to_string(), vec![1.0]), ("bad".to_string(), vec![0.0])];
        match build_similarity_graph(&v, EdgeRule::Positive) {
            Err(Error::ZeroVector(id)) => assert_eq!(id, "bad"),
            other => panic!("{other:?}"),
        }
        assert!(build_similarity_graph(&v[..1], EdgeRule::AtLeast(0.0)).is_err());
    }

    #[test]
    fn disjoint_sparse_supports_have_no_edges() {
        let v = vec![
            ("a".to_string(), SparseVector::from_pairs([(0, 1.0), (1, 2.0)])),
            ("b".to_string(), SparseVector::from_pairs([(2, 1.0)])),
            ("c".to_string(), SparseVector::from_pairs([(3, 1.0), (4, 1.0)])),
        ];
        assert_eq!(build_similarity_graph(&v, EdgeRule::Positive).unwrap().edge_count(), 0);
        assert_eq!(build_sparse_positive_graph(&v).unwrap().edge_count(), 0);
    }

    #[test]
    fn two_triangles_give_two_clusters() {
        let g = two_triangles();
        for seed in 0..50 {
            let c = chinese_whispers(&g, DEFAULT_MAX_ITERATIONS, seed);
            assert_eq!(c.num_clusters(), 2, "seed {seed}");
            assert_eq!(c.clusters(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        }
    }

    #[test]
    fn single_node_is_one_cluster() {
        let g = WeightedGraph::with_nodes(["solo"]).unwrap();
        let c = chinese_whispers(&g, 20, 1);
        assert_eq!(c.num_clusters(), 1);
        assert_eq!(c.labels(), [0]);
    }

    #[test]
    fn empty_graph() {
        let c = chinese_whispers(&WeightedGraph::new(), 20, 1);
        assert!(c.is_empty());
        assert_eq!(c.num_clusters(), 0);
    }

    #[test]
    fn complete_graph_collapses() {
        let mut g = WeightedGraph::with_nodes(["a", "b", "c", "d", "e"]).unwrap();
        for i in 0..5 {
            for j in i + 1..5 {
                g.add_edge(i, j, 1.0).unwrap();
            }
        }
        for seed in [0, 1, 42, 1234] {
            let c = chinese_whispers(&g, DEFAULT_MAX_ITERATIONS, seed);
            assert_eq!(c.num_clusters(), 1, "seed {seed}");
            assert!(c.converged());
        }
    }

    #[test]
    fn heavier_edge_wins() {
        // b sits between a (weight .9) and c (weight .2); a and c are leaves.
        let mut g = WeightedGraph::with_nodes(["a", "b", "c"]).unwrap();
        g.add_edge(0, 1, 0.9).unwrap();
        g.add_edge(1, 2, 0.2).unwrap();
        let c = chinese_whispers(&g, 50, 3);
        // c can only ever take b's label, b always takes a's.
        assert_eq!(c.num_clusters(), 1);
    }

    #[test]
    fn clustering_jsonl() {
        let g = two_triangles();
        let c = chinese_whispers(&g, 20, 9);
        let mut buf = Vec::new();
        c.write_jsonl(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"node":"a","cluster":0}"#);
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn from_labels_is_dense() {
        let c = Clustering::from_labels(&[7, 3, 7, 9]);
        assert_eq!(c.labels(), [0, 1, 0, 2]);
        assert_eq!(c.num_clusters(), 3);
    }
}
