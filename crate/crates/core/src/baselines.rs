//! Unsupervised centrality-based aligners and the common-neighbor link
//! predictor used for comparison runs.

use crate::error::{Error, Result};
use crate::exec::{chunked_accumulate, map_indexed, Execution};
use crate::graph::Graph;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityKind {
    Degree,
    Closeness,
    Betweenness,
    Eigenvector,
}

impl std::str::FromStr for CentralityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "degree" => Ok(CentralityKind::Degree),
            "closeness" => Ok(CentralityKind::Closeness),
            "betweenness" => Ok(CentralityKind::Betweenness),
            "eigenvector" => Ok(CentralityKind::Eigenvector),
            other => Err(Error::InvalidArgument(format!("unknown centrality `{other}`"))),
        }
    }
}

/// Closeness handling on disconnected graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosenessMode {
    /// Wasserman-Faust: within-component closeness scaled by
    /// (reachable-1)/(n-1).
    WassermanFaust,
    /// Classic (reachable-1)/sum-of-distances without the component scaling.
    Classic,
}

/// Compute one centrality score per node.
pub fn centrality(g: &Graph, kind: CentralityKind, exec: Execution) -> Result<Vec<f64>> {
    if g.node_count() == 0 {
        return Err(Error::EmptyGraph("centrality of empty graph".into()));
    }
    match kind {
        CentralityKind::Degree => Ok((0..g.node_count()).map(|u| g.degree(u) as f64).collect()),
        CentralityKind::Closeness => Ok(closeness(g, ClosenessMode::WassermanFaust, exec)),
        CentralityKind::Betweenness => Ok(betweenness(g, exec)),
        CentralityKind::Eigenvector => eigenvector(g),
    }
}

/// BFS distances from `source`; usize::MAX marks unreachable nodes.
fn bfs_distances(g: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[source] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn closeness(g: &Graph, mode: ClosenessMode, exec: Execution) -> Vec<f64> {
    let n = g.node_count();
    map_indexed(exec, n, |u| {
        let dist = bfs_distances(g, u);
        let mut reachable = 0usize;
        let mut total = 0usize;
        for &d in &dist {
            if d != usize::MAX {
                reachable += 1;
                total += d;
            }
        }
        if total == 0 || reachable <= 1 {
            return 0.0;
        }
        let base = (reachable - 1) as f64 / total as f64;
        match mode {
            ClosenessMode::WassermanFaust => {
                if n > 1 {
                    base * (reachable - 1) as f64 / (n - 1) as f64
                } else {
                    base
                }
            }
            ClosenessMode::Classic => base,
        }
    })
}

/// Brandes' exact betweenness for undirected graphs: one BFS plus dependency
/// back-propagation per source, final scores halved so each unordered pair
/// counts once. Source-parallel with order-fixed chunk accumulation.
pub fn betweenness(g: &Graph, exec: Execution) -> Vec<f64> {
    let n = g.node_count();
    let mut scores = chunked_accumulate(exec, n, n, 32, |range, acc| {
        let mut stack: Vec<usize> = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        let mut delta = vec![0.0f64; n];
        for s in range {
            stack.clear();
            for p in preds.iter_mut() {
                p.clear();
            }
            sigma.iter_mut().for_each(|x| *x = 0.0);
            dist.iter_mut().for_each(|x| *x = -1);
            delta.iter_mut().for_each(|x| *x = 0.0);

            sigma[s] = 1.0;
            dist[s] = 0;
            let mut queue = VecDeque::new();
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                stack.push(u);
                for &v in g.neighbors(u) {
                    if dist[v] < 0 {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                    if dist[v] == dist[u] + 1 {
                        sigma[v] += sigma[u];
                        preds[v].push(u);
                    }
                }
            }
            while let Some(w) = stack.pop() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    acc[w] += delta[w];
                }
            }
        }
    });
    for s in &mut scores {
        *s /= 2.0;
    }
    scores
}

const EIGEN_MAX_ITERS: usize = 10_000;
const EIGEN_TOL: f64 = 1e-10;
// Tiny diagonal shift breaks the +/- lambda oscillation of bipartite-like
// spectra without displacing the dominant eigenvector.
const EIGEN_SHIFT: f64 = 1e-9;

/// Eigenvector centrality by power iteration on the adjacency matrix.
/// Converges to residual ||A v - lambda v||_2 < 1e-10 with lambda the
/// Rayleigh quotient; the result is L2-normalized and non-negative.
pub fn eigenvector(g: &Graph) -> Result<Vec<f64>> {
    let n = g.node_count();
    let matvec = |v: &[f64], out: &mut [f64]| {
        for u in 0..n {
            let mut acc = EIGEN_SHIFT * v[u];
            for &w in g.neighbors(u) {
                acc += v[w];
            }
            out[u] = acc;
        }
    };
    // Degree start vector: positive, with good overlap with the dominant
    // eigenvector.
    let mut v: Vec<f64> = (0..n).map(|u| 1.0 + g.degree(u) as f64).collect();
    normalize(&mut v);
    let mut av = vec![0.0; n];
    for _ in 0..EIGEN_MAX_ITERS {
        matvec(&v, &mut av);
        let norm = l2(&av);
        if norm == 0.0 {
            return Err(Error::EigenvectorNoConvergence(EIGEN_MAX_ITERS));
        }
        for (x, &y) in v.iter_mut().zip(&av) {
            *x = y / norm;
        }
        // Residual against the unshifted adjacency.
        let mut raw = vec![0.0; n];
        for u in 0..n {
            let mut acc = 0.0;
            for &w in g.neighbors(u) {
                acc += v[w];
            }
            raw[u] = acc;
        }
        let lambda: f64 = v.iter().zip(&raw).map(|(a, b)| a * b).sum();
        let residual: f64 =
            raw.iter().zip(&v).map(|(r, x)| (r - lambda * x).powi(2)).sum::<f64>().sqrt();
        if residual < EIGEN_TOL {
            if v.iter().sum::<f64>() < 0.0 {
                for x in &mut v {
                    *x = -*x;
                }
            }
            for x in &mut v {
                if *x < 0.0 && *x > -1e-12 {
                    *x = 0.0;
                }
            }
            return Ok(v);
        }
    }
    Err(Error::EigenvectorNoConvergence(EIGEN_MAX_ITERS))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = l2(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

/// Rank target candidates for every source node by absolute centrality-score
/// difference (ascending), ties by ascending target id. `limit` truncates the
/// per-node lists.
pub fn centrality_align(
    source: &Graph,
    target: &Graph,
    kind: CentralityKind,
    limit: Option<usize>,
    exec: Execution,
) -> Result<Vec<Vec<usize>>> {
    let s_scores = centrality(source, kind, exec)?;
    let t_scores = centrality(target, kind, exec)?;
    let m = t_scores.len();
    let keep = limit.unwrap_or(m).min(m);
    Ok(map_indexed(exec, s_scores.len(), |u| {
        let su = s_scores[u];
        let mut cands: Vec<(usize, f64)> =
            t_scores.iter().enumerate().map(|(v, &tv)| (v, (su - tv).abs())).collect();
        cands.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        cands.truncate(keep);
        cands.into_iter().map(|(v, _)| v).collect()
    }))
}

/// Common-neighbor scores for candidate node pairs: |N(u) ∩ N(v)|.
/// Neighbor lists are sorted, so a linear merge counts the intersection.
pub fn common_neighbor_scores(g: &Graph, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| {
            let (mut a, mut b) = (g.neighbors(u).iter(), g.neighbors(v).iter());
            let (mut x, mut y) = (a.next(), b.next());
            let mut count = 0usize;
            while let (Some(&u1), Some(&v1)) = (x, y) {
                match u1.cmp(&v1) {
                    std::cmp::Ordering::Less => x = a.next(),
                    std::cmp::Ordering::Greater => y = b.next(),
                    std::cmp::Ordering::Equal => {
                        count += 1;
                        x = a.next();
                        y = b.next();
                    }
                }
            }
            count as f64
        })
        .collect()
}
