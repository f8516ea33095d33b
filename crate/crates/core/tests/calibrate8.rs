//! Diagnostics: supervised alignability ceiling of independently trained
//! embeddings (--ignored --nocapture).

use galign_core::embedding::{generate_walks, train_sgns, EmbeddingMatrix, WalkConfig};
use galign_core::eval::precision_at_n;
use galign_core::graph::{generate_aligned_pair, synth, AnchorKind, AnchorLinkSet};
use galign_core::refinement::{anchor_matrices, procrustes, rank_candidates, Retrieval};
use galign_core::Execution;

fn embed(graph: &galign_core::graph::Graph, cfg: &WalkConfig) -> EmbeddingMatrix {
    let corpus = generate_walks(graph, cfg, Execution::Parallel).unwrap();
    train_sgns(&corpus, cfg, Execution::Parallel).unwrap()
}

#[test]
#[ignore]
fn supervised_ceiling_by_embedding_config() {
    let g = synth::barabasi_albert(500, 4, 1).unwrap();
    let pair = generate_aligned_pair(&g, 0.9, 1).unwrap();
    let truth = AnchorLinkSet::identity(500, AnchorKind::GroundTruth);
    for (walks, len, window, epochs, negs, dim) in [
        (10usize, 40usize, 5usize, 5usize, 5usize, 32usize), // defaults
        (20, 40, 5, 10, 5, 32),
        (40, 80, 5, 10, 5, 32),
        (20, 40, 5, 10, 5, 16),
    ] {
        let mk = |s: u64| WalkConfig {
            walks_per_node: walks,
            walk_length: len,
            window,
            dim,
            negatives: negs,
            epochs,
            initial_lr: 0.025,
            seed: s,
        };
        let t0 = std::time::Instant::now();
        let zs = embed(&pair.source, &mk(11));
        let zt = embed(&pair.target, &mk(22));
        let secs = t0.elapsed().as_secs_f64();
        // Supervised Procrustes on all ground-truth anchors = ceiling.
        let (x, y) = anchor_matrices(&zs, &zt, &truth).unwrap();
        let w = procrustes(&x, &y).unwrap();
        let mapped = w.map_embeddings(&zs).unwrap();
        let ranked_nn =
            rank_candidates(&mapped, &zt, Retrieval::Nn, 10, Some(5), Execution::Parallel)
                .unwrap();
        let p_nn = precision_at_n(&ranked_nn, &truth, &[1, 5]).unwrap();
        let ranked_cgss =
            rank_candidates(&mapped, &zt, Retrieval::Cgss, 10, Some(5), Execution::Parallel)
                .unwrap();
        let p_cgss = precision_at_n(&ranked_cgss, &truth, &[1, 5]).unwrap();
        println!(
            "walks={walks} len={len} w={window} ep={epochs} neg={negs} d={dim}: \
             Procrustes-NN P@1={:.3} P@5={:.3} | Procrustes-CGSS P@1={:.3} P@5={:.3} [embed {secs:.0}s]",
            p_nn[&1], p_nn[&5], p_cgss[&1], p_cgss[&5]
        );
    }
}
