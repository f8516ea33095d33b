//! Synthetic graph generators used by tests, benchmarks, and fixtures.

use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::graph::Graph;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Erdos-Renyi G(n, p).
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must be in [0,1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x4552])); // "ER"
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Barabasi-Albert preferential attachment: starts from a clique of
/// `attach + 1` nodes, then each new node attaches to `attach` distinct
/// existing nodes sampled proportionally to degree.
pub fn barabasi_albert(n: usize, attach: usize, seed: u64) -> Result<Graph> {
    if attach == 0 || n <= attach {
        return Err(Error::InvalidArgument(format!(
            "need n > attach >= 1, got n={n} attach={attach}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x4241])); // "BA"
    let mut edges: Vec<(usize, usize)> = Vec::new();
    // Repeated-endpoint list makes degree-proportional sampling trivial.
    let mut endpoints: Vec<usize> = Vec::new();
    let core = attach + 1;
    for u in 0..core {
        for v in (u + 1)..core {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    for new in core..n {
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < attach {
            let pick = endpoints[rng.gen_range(0..endpoints.len())];
            chosen.insert(pick);
        }
        for &t in &chosen {
            edges.push((new, t));
            endpoints.push(new);
            endpoints.push(t);
        }
    }
    Graph::from_edges(n, &edges)
}

/// Two disjoint cliques of size `k`, optionally joined by a simple path of
/// `bridge` extra nodes (0 leaves them disconnected).
pub fn two_cliques(k: usize, bridge: usize) -> Result<Graph> {
    let n = 2 * k + bridge;
    let mut edges = Vec::new();
    for offset in [0, k] {
        for u in 0..k {
            for v in (u + 1)..k {
                edges.push((offset + u, offset + v));
            }
        }
    }
    if bridge > 0 {
        let mut chain = vec![0usize];
        chain.extend(2 * k..2 * k + bridge);
        chain.push(k); // ends at the second clique's first node
        for w in chain.windows(2) {
            edges.push((w[0], w[1]));
        }
    }
    Graph::from_edges(n, &edges)
}
