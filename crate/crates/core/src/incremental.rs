//! Graph extension with pseudo user links and the incremental outer loop.
//!
//! Extension: if two nodes are unlinked in one graph but their anchor
//! counterparts are linked in the other, add the edge. The outer loop
//! re-embeds both (extended) graphs each round, re-runs adversarial training
//! and refinement, extends with the freshly mined pseudo anchors, and stops
//! when the anchor set stabilizes or after `outer_max` rounds.

use crate::adversarial::{train_adversarial, AdvConfig, EpochLoss, MappingMatrix};
use crate::embedding::{generate_walks, train_sgns, EmbeddingMatrix, WalkConfig};
use crate::error::{Error, Result};
use crate::eval::{anchor_precision, precision_at_n, AlignmentReport, RoundMetrics};
use crate::exec::{derive_seed, Execution};
use crate::graph::{AnchorLinkSet, Graph};
use crate::refinement::{rank_candidates, refine, RefineConfig, RefineOutcome, Retrieval};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// Which role the graph being extended plays in the anchor orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtendDirection {
    /// `g` is the source graph: anchors read (node of g, node of other).
    Source,
    /// `g` is the target graph: anchors read (node of other, node of g).
    Target,
}

/// Extend `g` with pseudo user links: for anchor pairs (u,u') and (v,v'),
/// add edge (u,v) to `g` whenever (u',v') is an edge of `other`. The node set
/// is unchanged; output is deduplicated and symmetric with no self-loops.
pub fn extend_graph(
    g: &Graph,
    other: &Graph,
    anchors: &AnchorLinkSet,
    direction: ExtendDirection,
) -> Result<Graph> {
    // Map: node of `other` -> node of `g`.
    let mut back = HashMap::with_capacity(anchors.len());
    for &(s, t) in anchors.pairs() {
        let (own, theirs) = match direction {
            ExtendDirection::Source => (s, t),
            ExtendDirection::Target => (t, s),
        };
        if own >= g.node_count() {
            return Err(Error::UnknownNodeId(format!("anchor node {own} not in graph")));
        }
        if theirs >= other.node_count() {
            return Err(Error::UnknownNodeId(format!(
                "anchor node {theirs} not in counterpart graph"
            )));
        }
        back.insert(theirs, own);
    }
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    for (a, b) in other.edges() {
        if let (Some(&u), Some(&v)) = (back.get(&a), back.get(&b)) {
            if u != v {
                edges.push((u, v));
            }
        }
    }
    let mut extended = Graph::from_edges(g.node_count(), &edges)?;
    if g.has_labels() {
        extended = extended.with_labels(g.labels())?;
    }
    Ok(extended)
}

/// Full pipeline configuration: embedding, adversarial phase, refinement, and
/// the incremental loop controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub walk: WalkConfig,
    pub adv: AdvConfig,
    pub refine: RefineConfig,
    /// Maximum outer rounds (1 degenerates to plain alignment plus one
    /// extension round).
    pub outer_max: usize,
    /// Stop when the relative symmetric difference between consecutive
    /// pseudo-anchor sets falls below this ratio.
    pub stop_tol: f64,
    /// Retrieval rule for the final candidate ranking.
    pub retrieval: Retrieval,
    /// Ns for the final Precision@N evaluation.
    pub precision_ns: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            walk: WalkConfig::default(),
            adv: AdvConfig::default(),
            refine: RefineConfig::default(),
            outer_max: 5,
            stop_tol: 0.01,
            retrieval: Retrieval::Cgss,
            precision_ns: vec![1, 5, 10],
        }
    }
}

/// Adversarial alignment of two fixed embedding spaces plus one refinement
/// round (the non-incremental pipeline body).
#[derive(Debug, Clone)]
pub struct SpaceAlignment {
    pub adversarial_mapping: MappingMatrix,
    pub refined_mapping: MappingMatrix,
    pub anchors: AnchorLinkSet,
    pub scores: Vec<f64>,
    pub no_anchors: bool,
    pub loss_history: Vec<EpochLoss>,
}

pub fn align_spaces(
    zs: &EmbeddingMatrix,
    zt: &EmbeddingMatrix,
    adv: &AdvConfig,
    refine_cfg: &RefineConfig,
    exec: Execution,
) -> Result<SpaceAlignment> {
    let (w_adv, loss_history) = train_adversarial(zs, zt, adv, exec)?;
    let RefineOutcome { mapping, anchors, scores, no_anchors } =
        refine(&w_adv, zs, zt, refine_cfg, exec)?;
    Ok(SpaceAlignment {
        adversarial_mapping: w_adv,
        refined_mapping: mapping,
        anchors,
        scores,
        no_anchors,
        loss_history,
    })
}

/// Embed both graphs; the two trainings run concurrently under a parallel
/// executor since they share no state.
fn embed_pair(
    src: &Graph,
    tgt: &Graph,
    cfg: &WalkConfig,
    round: usize,
    exec: Execution,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let mut cfg_s = cfg.clone();
    cfg_s.seed = derive_seed(cfg.seed, &[0x524e44, round as u64, 0]); // "RND"
    let mut cfg_t = cfg.clone();
    cfg_t.seed = derive_seed(cfg.seed, &[0x524e44, round as u64, 1]);
    let run_s = || -> Result<EmbeddingMatrix> {
        let walks = generate_walks(src, &cfg_s, exec)?;
        train_sgns(&walks, &cfg_s, exec)
    };
    let run_t = || -> Result<EmbeddingMatrix> {
        let walks = generate_walks(tgt, &cfg_t, exec)?;
        train_sgns(&walks, &cfg_t, exec)
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        let (a, b) = rayon::join(run_s, run_t);
        return Ok((a?, b?));
    }
    Ok((run_s()?, run_t()?))
}

/// Result of the incremental loop.
#[derive(Debug, Clone)]
pub struct IuagaOutcome {
    pub mapping: MappingMatrix,
    pub anchors: AnchorLinkSet,
    pub report: AlignmentReport,
    pub extended_source: Graph,
    pub extended_target: Graph,
    pub source_embedding: EmbeddingMatrix,
    pub target_embedding: EmbeddingMatrix,
}

/// The incremental loop: per round, re-embed both graphs, learn the mapping
/// adversarially, refine it on mined pseudo anchors, then extend both graphs
/// with the anchors (which are reset between rounds). The final alignment is
/// scored with the learned mapping and the configured retrieval rule on the
/// last round's embeddings.
pub fn run_iuaga(
    source: &Graph,
    target: &Graph,
    truth: Option<&AnchorLinkSet>,
    cfg: &PipelineConfig,
    checkpoint_dir: Option<&Path>,
    exec: Execution,
) -> Result<IuagaOutcome> {
    if source.node_count() == 0 || target.node_count() == 0 {
        return Err(Error::EmptyGraph("cannot align empty graphs".into()));
    }
    if cfg.outer_max == 0 {
        return Err(Error::InvalidArgument("outer_max must be >= 1".into()));
    }
    if cfg.stop_tol < 0.0 {
        return Err(Error::InvalidArgument("stop_tol must be >= 0".into()));
    }

    let mut src = source.clone();
    let mut tgt = target.clone();
    let mut report = AlignmentReport::new("iuaga", "iuaga", cfg.walk.seed);
    let mut prev_anchors: Option<AnchorLinkSet> = None;
    let mut mapping = MappingMatrix::identity(cfg.walk.dim.max(2));
    let mut anchors = AnchorLinkSet::identity(0, crate::graph::AnchorKind::Pseudo);
    let mut zs = EmbeddingMatrix::zeros(0, cfg.walk.dim.max(2));
    let mut zt = zs.clone();

    for round in 0..cfg.outer_max {
        let (round_zs, round_zt) = embed_pair(&src, &tgt, &cfg.walk, round, exec)?;
        let mut adv = cfg.adv.clone();
        adv.seed = derive_seed(cfg.adv.seed, &[0x414456, round as u64]); // "ADV"
        let alignment = align_spaces(&round_zs, &round_zt, &adv, &cfg.refine, exec)?;
        zs = round_zs;
        zt = round_zt;
        report.loss_history = alignment.loss_history.clone();

        if alignment.no_anchors {
            // Starved: keep the adversarial mapping and stop.
            mapping = alignment.adversarial_mapping.clone();
            anchors = alignment.anchors.clone();
            report.rounds.push(RoundMetrics {
                round,
                pseudo_anchor_count: 0,
                pseudo_anchor_precision: None,
                source_edges_added: 0,
                target_edges_added: 0,
                false_source_edges: None,
                false_target_edges: None,
                anchor_set_change: None,
            });
            report.early_stop = Some(format!("zero pseudo anchors at round {round}"));
            if let Some(dir) = checkpoint_dir {
                checkpoint_round(dir, round, &src, &tgt, &zs, &zt, &mapping, &anchors, &[], &report)?;
            }
            break;
        }

        mapping = alignment.refined_mapping.clone();
        anchors = alignment.anchors.clone();

        // Extend both graphs with this round's anchors (Eq. 10 both ways).
        let new_src = extend_graph(&src, &tgt, &anchors, ExtendDirection::Source)?;
        let new_tgt = extend_graph(&tgt, &src, &anchors, ExtendDirection::Target)?;
        let src_added = new_src.edge_count() - src.edge_count();
        let tgt_added = new_tgt.edge_count() - tgt.edge_count();

        let (false_src, false_tgt) = match truth {
            Some(t) => {
                let fwd: HashMap<usize, usize> = t.pairs().iter().copied().collect();
                let bwd: HashMap<usize, usize> =
                    t.pairs().iter().map(|&(s, v)| (v, s)).collect();
                let count_false = |before: &Graph, after: &Graph, counterpart: &Graph,
                                    map: &HashMap<usize, usize>| {
                    let mut false_edges = 0usize;
                    for (u, v) in after.edges() {
                        if before.has_edge(u, v) {
                            continue;
                        }
                        match (map.get(&u), map.get(&v)) {
                            (Some(&cu), Some(&cv)) if counterpart.has_edge(cu, cv) => {}
                            _ => false_edges += 1,
                        }
                    }
                    false_edges
                };
                (
                    Some(count_false(&src, &new_src, &tgt, &fwd)),
                    Some(count_false(&tgt, &new_tgt, &src, &bwd)),
                )
            }
            None => (None, None),
        };

        let change = prev_anchors.as_ref().map(|prev| {
            let diff = prev.symmetric_difference(&anchors);
            diff as f64 / prev.len().max(anchors.len()).max(1) as f64
        });

        report.rounds.push(RoundMetrics {
            round,
            pseudo_anchor_count: anchors.len(),
            pseudo_anchor_precision: truth.and_then(|t| anchor_precision(&anchors, t)),
            source_edges_added: src_added,
            target_edges_added: tgt_added,
            false_source_edges: false_src,
            false_target_edges: false_tgt,
            anchor_set_change: change,
        });

        if let Some(dir) = checkpoint_dir {
            checkpoint_round(
                dir,
                round,
                &new_src,
                &new_tgt,
                &zs,
                &zt,
                &mapping,
                &anchors,
                &alignment.scores,
                &report,
            )?;
        }

        src = new_src;
        tgt = new_tgt;
        let converged = change.is_some_and(|c| c < cfg.stop_tol);
        prev_anchors = Some(anchors.clone());
        if converged {
            report.early_stop = Some(format!("anchor set stabilized at round {round}"));
            break;
        }
    }

    // Final alignment with the learned mapping and the configured retrieval.
    if let Some(t) = truth {
        if !zs.is_empty() && !zt.is_empty() {
            let mapped = mapping.map_embeddings(&zs)?;
            let limit = cfg.precision_ns.iter().copied().max().unwrap_or(1);
            let ranked =
                rank_candidates(&mapped, &zt, cfg.retrieval, cfg.refine.k, Some(limit), exec)?;
            report.precision_at = precision_at_n(&ranked, t, &cfg.precision_ns)?;
        }
        report.pseudo_anchor_precision = anchor_precision(&anchors, t);
    }
    report.pseudo_anchor_count = Some(anchors.len());

    Ok(IuagaOutcome {
        mapping,
        anchors,
        report,
        extended_source: src,
        extended_target: tgt,
        source_embedding: zs,
        target_embedding: zt,
    })
}

#[allow(clippy::too_many_arguments)]
fn checkpoint_round(
    dir: &Path,
    round: usize,
    src: &Graph,
    tgt: &Graph,
    zs: &EmbeddingMatrix,
    zt: &EmbeddingMatrix,
    w: &MappingMatrix,
    anchors: &AnchorLinkSet,
    scores: &[f64],
    report: &AlignmentReport,
) -> Result<()> {
    use crate::adversarial::write_mapping_file;
    use crate::embedding::io::write_text_file;
    use crate::graph::io::{save_edge_list, write_anchors};

    let round_dir = dir.join(format!("round_{round:03}"));
    std::fs::create_dir_all(&round_dir)?;
    save_edge_list(src, &round_dir.join("source.edges"))?;
    save_edge_list(tgt, &round_dir.join("target.edges"))?;
    write_text_file(zs, &round_dir.join("source.emb"))?;
    write_text_file(zt, &round_dir.join("target.emb"))?;
    write_mapping_file(w, &round_dir.join("w.map"))?;
    let f = std::fs::File::create(round_dir.join("pseudo_anchors.tsv"))?;
    let score_col = if scores.len() == anchors.len() { Some(scores) } else { None };
    write_anchors(
        anchors,
        &src.labels(),
        &tgt.labels(),
        score_col.map(|s| &s[..]),
        std::io::BufWriter::new(f),
    )?;
    let metrics = report.rounds.last();
    let f = std::fs::File::create(round_dir.join("metrics.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &metrics)?;
    Ok(())
}
