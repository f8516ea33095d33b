//! Metrics and report assembly: Precision@N for alignment, precision@k for
//! link prediction, JSON reports and the Table-style CSV summary.

use crate::adversarial::EpochLoss;
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::graph::{AnchorLinkSet, Graph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Precision@N over per-source ranked candidate lists. Only source nodes with
/// a ground-truth counterpart enter the denominator. `candidates[s]` must
/// hold at least `max(ns)` entries for every such source node.
pub fn precision_at_n(
    candidates: &[Vec<usize>],
    truth: &AnchorLinkSet,
    ns: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::InvalidArgument("precision Ns must be positive".into()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("ground truth is empty".into()));
    }
    let max_n = *ns.iter().max().unwrap();
    for &(s, _) in truth.pairs() {
        let list = candidates
            .get(s)
            .ok_or_else(|| Error::UnknownNodeId(format!("source node {s} has no candidates")))?;
        if list.len() < max_n {
            return Err(Error::InvalidArgument(format!(
                "candidate list for source {s} has {} entries, need {max_n}",
                list.len()
            )));
        }
    }
    let mut out = BTreeMap::new();
    for &n in ns {
        let mut hits = 0usize;
        for &(s, t) in truth.pairs() {
            if candidates[s][..n].contains(&t) {
                hits += 1;
            }
        }
        out.insert(n, hits as f64 / truth.len() as f64);
    }
    Ok(out)
}

/// Split a graph into an observed graph and a held-out positive edge set.
/// The held-out fraction is removed uniformly at random (deterministic per
/// seed); isolated nodes are kept so node ids stay stable.
pub fn hold_out_edges(g: &Graph, fraction: f64, seed: u64) -> Result<(Graph, Vec<(usize, usize)>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument("holdout fraction must be in [0, 1)".into()));
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let n_hold = (fraction * edges.len() as f64 + 0.5).floor() as usize;
    let mut order: Vec<usize> = (0..edges.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x484f4c44])); // "HOLD"
    order.shuffle(&mut rng);
    let held: std::collections::BTreeSet<usize> = order[..n_hold].iter().copied().collect();
    let kept: Vec<(usize, usize)> = edges
        .iter()
        .enumerate()
        .filter(|(i, _)| !held.contains(i))
        .map(|(_, &e)| e)
        .collect();
    let mut observed = Graph::from_edges(g.node_count(), &kept)?;
    if g.has_labels() {
        observed = observed.with_labels(g.labels())?;
    }
    let held_edges: Vec<(usize, usize)> = held.iter().map(|&i| edges[i]).collect();
    Ok((observed, held_edges))
}

/// precision@k for link prediction: fraction of the top-k scored non-observed
/// pairs that are held-out positives. Ties break by ascending pair id so the
/// ranking is deterministic.
pub fn link_prediction_eval(
    scored_pairs: &[((usize, usize), f64)],
    held_out: &[(usize, usize)],
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if ks.iter().any(|&k| k == 0 || k > scored_pairs.len()) {
        return Err(Error::InvalidArgument(format!(
            "every k must be in [1, {}]",
            scored_pairs.len()
        )));
    }
    let positives: std::collections::BTreeSet<(usize, usize)> = held_out
        .iter()
        .map(|&(u, v)| if u <= v { (u, v) } else { (v, u) })
        .collect();
    let mut ranked: Vec<&((usize, usize), f64)> = scored_pairs.iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut out = BTreeMap::new();
    for &k in ks {
        let hits = ranked[..k]
            .iter()
            .filter(|((u, v), _)| {
                let key = if u <= v { (*u, *v) } else { (*v, *u) };
                positives.contains(&key)
            })
            .count();
        out.insert(k, hits as f64 / k as f64);
    }
    Ok(out)
}

/// All non-adjacent unordered node pairs of a graph.
pub fn non_observed_pairs(g: &Graph) -> Vec<(usize, usize)> {
    let n = g.node_count();
    let mut out = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if !g.has_edge(u, v) {
                out.push((u, v));
            }
        }
    }
    out
}

/// Per-round metrics of the incremental loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub pseudo_anchor_count: usize,
    /// Fraction of mined anchors that agree with ground truth (when known).
    pub pseudo_anchor_precision: Option<f64>,
    pub source_edges_added: usize,
    pub target_edges_added: usize,
    /// Added edges whose ground-truth counterpart edge does not exist (when
    /// ground truth is known).
    pub false_source_edges: Option<usize>,
    pub false_target_edges: Option<usize>,
    pub anchor_set_change: Option<f64>,
}

/// Per-scenario alignment outcome. Wall-clock time is intentionally not part
/// of this structure: reports must be byte-identical across reruns with the
/// same seed, so timings go in a separate sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub scenario: String,
    pub method: String,
    pub precision_at: BTreeMap<usize, f64>,
    pub pseudo_anchor_count: Option<usize>,
    pub pseudo_anchor_precision: Option<f64>,
    pub rounds: Vec<RoundMetrics>,
    pub loss_history: Vec<EpochLoss>,
    pub config: serde_json::Value,
    pub seed: u64,
    /// Set when the incremental loop stopped early (converged or starved of
    /// anchors).
    pub early_stop: Option<String>,
}

impl AlignmentReport {
    pub fn new(scenario: &str, method: &str, seed: u64) -> Self {
        AlignmentReport {
            scenario: scenario.to_string(),
            method: method.to_string(),
            precision_at: BTreeMap::new(),
            pseudo_anchor_count: None,
            pseudo_anchor_precision: None,
            rounds: Vec::new(),
            loss_history: Vec::new(),
            config: serde_json::Value::Null,
            seed,
            early_stop: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev: Option<(usize, f64)> = None;
        for (&n, &p) in &self.precision_at {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("P@{n} = {p} out of [0,1]")));
            }
            if let Some((pn, pp)) = prev {
                if n >= pn && p < pp {
                    return Err(Error::InvalidArgument(format!(
                        "precision not monotone: P@{pn}={pp} > P@{n}={p}"
                    )));
                }
            }
            prev = Some((n, p));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<AlignmentReport> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Fraction of pseudo anchors that agree with the ground-truth bijection.
pub fn anchor_precision(pseudo: &AnchorLinkSet, truth: &AnchorLinkSet) -> Option<f64> {
    if pseudo.is_empty() {
        return None;
    }
    let truth_map: BTreeMap<usize, usize> = truth.pairs().iter().copied().collect();
    let correct = pseudo
        .pairs()
        .iter()
        .filter(|(s, t)| truth_map.get(s) == Some(t))
        .count();
    Some(correct as f64 / pseudo.len() as f64)
}

/// Summary CSV: one row per report, `method,P@n1,P@n2,...` columns.
pub fn write_summary_csv<W: Write>(reports: &[AlignmentReport], ns: &[usize], mut w: W) -> Result<()> {
    let header: Vec<String> = ns.iter().map(|n| format!("P@{n}")).collect();
    writeln!(w, "method,{}", header.join(","))?;
    for r in reports {
        let cells: Vec<String> = ns
            .iter()
            .map(|n| r.precision_at.get(n).map_or("".to_string(), |p| format!("{p:.4}")))
            .collect();
        writeln!(w, "{},{}", r.method, cells.join(","))?;
    }
    Ok(())
}

/// Mean of each P@N across a set of per-seed reports.
pub fn mean_precision(reports: &[AlignmentReport]) -> BTreeMap<usize, f64> {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in reports {
        for (&n, &p) in &r.precision_at {
            let e = sums.entry(n).or_insert((0.0, 0));
            e.0 += p;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(n, (s, c))| (n, s / c as f64)).collect()
}
