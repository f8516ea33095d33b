//! Graph representation and the aligned-subgraph benchmark generator.
//!
//! Graphs are immutable, undirected, and stored in compressed sparse row form
//! over dense node ids. Input edge lists are symmetrized and deduplicated on
//! load; self-loops are dropped.

pub mod io;
pub mod synth;

use crate::error::{Error, Result};
use crate::exec::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Immutable undirected graph in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl Graph {
    /// Build from an edge list over dense ids in `0..node_count`.
    /// Symmetrizes, deduplicates, sorts neighbor lists, drops self-loops.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); node_count];
        for &(u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u},{v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                continue;
            }
            adj[u].insert(v);
            adj[v].insert(u);
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for set in &adj {
            neighbors.extend(set.iter().copied());
            offsets.push(neighbors.len());
        }
        Ok(Graph { offsets, neighbors, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Graph> {
        if labels.len() != self.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.node_count()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Canonical edge iterator (u < v).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count())
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// True when original string ids were retained.
    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Original string id for a node, if labels were retained.
    pub fn label(&self, u: usize) -> String {
        match &self.labels {
            Some(l) => l[u].clone(),
            None => u.to_string(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.node_count()).map(|u| self.label(u)).collect()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// Ground-truth or pseudo anchor links between two graphs' node ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnchorKind {
    GroundTruth,
    Pseudo,
}

/// A point-to-point set of (source node, target node) pairs: no source id and
/// no target id appears twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorLinkSet {
    pairs: Vec<(usize, usize)>,
    kind: AnchorKind,
}

impl AnchorLinkSet {
    pub fn new(mut pairs: Vec<(usize, usize)>, kind: AnchorKind) -> Result<AnchorLinkSet> {
        pairs.sort_unstable();
        let mut seen_src = BTreeSet::new();
        let mut seen_tgt = BTreeSet::new();
        for &(s, t) in &pairs {
            if !seen_src.insert(s) {
                return Err(Error::InvalidArgument(format!("source id {s} appears twice")));
            }
            if !seen_tgt.insert(t) {
                return Err(Error::InvalidArgument(format!("target id {t} appears twice")));
            }
        }
        Ok(AnchorLinkSet { pairs, kind })
    }

    pub fn identity(n: usize, kind: AnchorKind) -> AnchorLinkSet {
        AnchorLinkSet { pairs: (0..n).map(|i| (i, i)).collect(), kind }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn kind(&self) -> AnchorKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Size of the symmetric difference between two sets of pairs.
    pub fn symmetric_difference(&self, other: &AnchorLinkSet) -> usize {
        let a: BTreeSet<_> = self.pairs.iter().collect();
        let b: BTreeSet<_> = other.pairs.iter().collect();
        a.symmetric_difference(&b).count()
    }
}

/// Two edge-dropout subgraphs of a common graph plus ground-truth anchors.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    pub source: Graph,
    pub target: Graph,
    pub ground_truth: AnchorLinkSet,
    pub lambda_e: f64,
}

/// Filter strategy for `filter_min_degree`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterMode {
    /// Iterate removals until no node of degree <= min_deg remains.
    Fixpoint,
    /// Remove only the nodes that fail the threshold in the input graph.
    SinglePass,
}

/// Remove nodes with degree <= `min_deg`. Returns the filtered graph and the
/// old-id -> new-id mapping (None for removed nodes). `Fixpoint` mode repeats
/// the scan because removals lower surviving neighbors' degrees.
pub fn filter_min_degree(
    g: &Graph,
    min_deg: usize,
    mode: FilterMode,
) -> Result<(Graph, Vec<Option<usize>>)> {
    let n = g.node_count();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|u| g.degree(u)).collect();
    loop {
        let mut removed_any = false;
        let to_remove: Vec<usize> =
            (0..n).filter(|&u| alive[u] && degree[u] <= min_deg).collect();
        for &u in &to_remove {
            alive[u] = false;
            removed_any = true;
            for &v in g.neighbors(u) {
                if alive[v] {
                    degree[v] -= 1;
                }
            }
        }
        if !removed_any || mode == FilterMode::SinglePass {
            break;
        }
    }

    let mut mapping = vec![None; n];
    let mut next = 0usize;
    for u in 0..n {
        if alive[u] {
            mapping[u] = Some(next);
            next += 1;
        }
    }
    if next == 0 {
        return Err(Error::DegreeFilterEliminated);
    }
    let mut edges = Vec::new();
    for (u, v) in g.edges() {
        if let (Some(nu), Some(nv)) = (mapping[u], mapping[v]) {
            edges.push((nu, nv));
        }
    }
    let mut filtered = Graph::from_edges(next, &edges)?;
    if g.labels.is_some() {
        let labels: Vec<String> =
            (0..n).filter(|&u| alive[u]).map(|u| g.label(u)).collect();
        filtered = filtered.with_labels(labels)?;
    }
    Ok((filtered, mapping))
}

const STREAM_DROPOUT: u64 = 0x44_52_4f_50; // "DROP"

/// Generate an aligned source/target pair by dropping two disjoint uniform
/// random edge subsets. With shared edge ratio `lambda_e`, each side loses a
/// `(1 - lambda_e)/2` fraction of the edges (count rounded half-up). Node sets
/// are inherited unchanged, so the ground truth is the identity bijection.
pub fn generate_aligned_pair(g: &Graph, lambda_e: f64, seed: u64) -> Result<AlignedPair> {
    if !(lambda_e > 0.0 && lambda_e <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_e must be in (0, 1], got {lambda_e}"
        )));
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let m = edges.len();
    let rho = (1.0 - lambda_e) / 2.0;
    let drop_per_side = (rho * m as f64 + 0.5).floor() as usize;
    if 2 * drop_per_side > m {
        return Err(Error::InvalidArgument(format!(
            "cannot drop {drop_per_side} edges per side from {m} edges"
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_DROPOUT]));
    order.shuffle(&mut rng);
    // Disjoint drop sets: the first block leaves the source, the second block
    // leaves the target.
    let drop_source: BTreeSet<usize> = order[..drop_per_side].iter().copied().collect();
    let drop_target: BTreeSet<usize> =
        order[drop_per_side..2 * drop_per_side].iter().copied().collect();

    let keep = |dropped: &BTreeSet<usize>| -> Vec<(usize, usize)> {
        edges
            .iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, &e)| e)
            .collect()
    };
    let n = g.node_count();
    let mut source = Graph::from_edges(n, &keep(&drop_source))?;
    let mut target = Graph::from_edges(n, &keep(&drop_target))?;
    if g.labels.is_some() {
        source = source.with_labels(g.labels())?;
        target = target.with_labels(g.labels())?;
    }
    Ok(AlignedPair {
        source,
        target,
        ground_truth: AnchorLinkSet::identity(n, AnchorKind::GroundTruth),
        lambda_e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_edges_symmetrizes_and_dedups() {
        let g = Graph::from_edges(2, &[(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn self_loops_are_dropped() {
        let g = Graph::from_edges(3, &[(0, 0), (0, 1), (1, 2)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(!g.has_edge(0, 0));
    }

    #[test]
    fn adjacency_is_symmetric() {
        let g = synth::erdos_renyi(50, 0.1, 5).unwrap();
        for u in 0..g.node_count() {
            for &v in g.neighbors(u) {
                assert!(g.has_edge(v, u), "asymmetric edge ({u},{v})");
            }
        }
    }

    #[test]
    fn filter_star_cascades_to_empty() {
        // 1 hub + 5 leaves: leaves fail (deg 1 <= 3), then hub (deg 0 <= 3).
        let edges: Vec<(usize, usize)> = (1..6).map(|v| (0, v)).collect();
        let g = Graph::from_edges(6, &edges).unwrap();
        match filter_min_degree(&g, 3, FilterMode::Fixpoint) {
            Err(Error::DegreeFilterEliminated) => {}
            other => panic!("expected elimination error, got {other:?}"),
        }
    }

    #[test]
    fn filter_keeps_complete_graph() {
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in (u + 1)..5 {
                edges.push((u, v));
            }
        }
        let g = Graph::from_edges(5, &edges).unwrap();
        let (filtered, mapping) = filter_min_degree(&g, 3, FilterMode::Fixpoint).unwrap();
        assert_eq!(filtered.node_count(), 5);
        assert_eq!(filtered.edge_count(), 10);
        assert!(mapping.iter().all(|m| m.is_some()));
    }

    /// Brute-force oracle: rebuild the graph from scratch and rescan until no
    /// node fails, without incremental degree bookkeeping.
    fn naive_fixpoint_filter(g: &Graph, min_deg: usize) -> Vec<bool> {
        let n = g.node_count();
        let mut alive = vec![true; n];
        loop {
            let deg = |u: usize, alive: &[bool]| -> usize {
                g.neighbors(u).iter().filter(|&&v| alive[v]).count()
            };
            let removals: Vec<usize> = (0..n)
                .filter(|&u| alive[u] && deg(u, &alive) <= min_deg)
                .collect();
            if removals.is_empty() {
                break;
            }
            for u in removals {
                alive[u] = false;
            }
        }
        alive
    }

    #[test]
    fn filter_matches_naive_repeated_scan_oracle() {
        let g = synth::erdos_renyi(200, 0.1, 42).unwrap();
        let expected = naive_fixpoint_filter(&g, 3);
        let (filtered, mapping) = filter_min_degree(&g, 3, FilterMode::Fixpoint).unwrap();
        for u in 0..g.node_count() {
            assert_eq!(mapping[u].is_some(), expected[u], "node {u}");
        }
        let survivors = expected.iter().filter(|&&a| a).count();
        assert_eq!(filtered.node_count(), survivors);
        // Edges survive iff both endpoints survive.
        for (u, v) in g.edges() {
            if let (Some(nu), Some(nv)) = (mapping[u], mapping[v]) {
                assert!(filtered.has_edge(nu, nv));
            }
        }
    }

    #[test]
    fn single_pass_filter_leaves_cascade_nodes() {
        // Path a-b-c-d: ends fail min_deg 1, single pass keeps b-c (now deg 1).
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let (filtered, _) = filter_min_degree(&g, 1, FilterMode::SinglePass).unwrap();
        assert_eq!(filtered.node_count(), 2);
        assert_eq!(filtered.edge_count(), 1);
        assert!(filter_min_degree(&g, 1, FilterMode::Fixpoint).is_err());
    }

    #[test]
    fn aligned_pair_lambda_one_drops_nothing() {
        let g = synth::erdos_renyi(40, 0.2, 1).unwrap();
        let pair = generate_aligned_pair(&g, 1.0, 9).unwrap();
        assert_eq!(pair.source, g);
        assert_eq!(pair.target, g);
    }

    #[test]
    fn aligned_pair_counts_at_lambda_09() {
        // |E| = 1000 exactly: each side keeps 950, intersection 900.
        let mut edges = Vec::new();
        let mut u = 0usize;
        let mut v = 1usize;
        let n = 1200;
        while edges.len() < 1000 {
            v += 1;
            if v >= n {
                u += 1;
                v = u + 1;
            }
            edges.push((u, v));
        }
        let g = Graph::from_edges(n, &edges).unwrap();
        assert_eq!(g.edge_count(), 1000);
        let pair = generate_aligned_pair(&g, 0.9, 7).unwrap();
        assert_eq!(pair.source.edge_count(), 950);
        assert_eq!(pair.target.edge_count(), 950);
        let es: BTreeSet<_> = pair.source.edges().collect();
        let et: BTreeSet<_> = pair.target.edges().collect();
        assert_eq!(es.intersection(&et).count(), 900);
    }

    #[test]
    fn aligned_pair_intersection_ratio_exact_set_oracle() {
        let g = synth::erdos_renyi(100, 0.2, 3).unwrap();
        let m = g.edge_count();
        let pair = generate_aligned_pair(&g, 0.8, 11).unwrap();
        let es: BTreeSet<_> = pair.source.edges().collect();
        let et: BTreeSet<_> = pair.target.edges().collect();
        let shared = es.intersection(&et).count();
        let drop = (0.1 * m as f64 + 0.5).floor() as usize;
        assert_eq!(shared, m - 2 * drop);
        // Dropped sets disjoint: each side is missing exactly `drop` edges and
        // every edge survives on at least one side.
        let all: BTreeSet<_> = g.edges().collect();
        assert_eq!(es.union(&et).count(), all.len());
    }

    #[test]
    fn aligned_pair_is_deterministic() {
        let g = synth::erdos_renyi(60, 0.15, 2).unwrap();
        let a = generate_aligned_pair(&g, 0.85, 123).unwrap();
        let b = generate_aligned_pair(&g, 0.85, 123).unwrap();
        assert_eq!(a.source, b.source);
        assert_eq!(a.target, b.target);
        assert_eq!(a.ground_truth, b.ground_truth);
        let c = generate_aligned_pair(&g, 0.85, 124).unwrap();
        assert_ne!(a.source.edges().collect::<Vec<_>>(), c.source.edges().collect::<Vec<_>>());
    }

    #[test]
    fn aligned_pair_rejects_bad_lambda() {
        let g = synth::erdos_renyi(10, 0.5, 1).unwrap();
        assert!(generate_aligned_pair(&g, 0.0, 1).is_err());
        assert!(generate_aligned_pair(&g, 1.2, 1).is_err());
    }

    #[test]
    fn anchor_set_rejects_duplicate_endpoints() {
        assert!(AnchorLinkSet::new(vec![(0, 1), (0, 2)], AnchorKind::Pseudo).is_err());
        assert!(AnchorLinkSet::new(vec![(0, 1), (2, 1)], AnchorKind::Pseudo).is_err());
        assert!(AnchorLinkSet::new(vec![(0, 1), (2, 3)], AnchorKind::Pseudo).is_ok());
    }
}
