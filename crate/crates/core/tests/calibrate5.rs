//! Diagnostics: dropout strength and seed sensitivity (--ignored --nocapture).

use galign_core::adversarial::{train_adversarial, AdvConfig, MappingMatrix};
use galign_core::embedding::{generate_walks, train_sgns, EmbeddingMatrix, WalkConfig};
use galign_core::eval::precision_at_n;
use galign_core::graph::{synth, AnchorKind, AnchorLinkSet};
use galign_core::linalg::{random_orthogonal, DenseMatrix};
use galign_core::refinement::{rank_candidates, refine, RefineConfig, Retrieval};
use galign_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn planted_instance(
    n: usize,
    seed: u64,
    noise: f32,
) -> (EmbeddingMatrix, EmbeddingMatrix, DenseMatrix) {
    let g = synth::barabasi_albert(n, 3, seed).unwrap();
    let cfg = WalkConfig { seed, ..WalkConfig::default() };
    let corpus = generate_walks(&g, &cfg, Execution::Parallel).unwrap();
    let zs = train_sgns(&corpus, &cfg, Execution::Sequential).unwrap();
    let q = random_orthogonal(32, seed + 7);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 13);
    let mut zt = EmbeddingMatrix::zeros(n, 32);
    for i in 0..n {
        let z64: Vec<f64> = zs.row(i).iter().map(|&x| x as f64).collect();
        let rotated = q.mul_vec(&z64);
        for (o, v) in zt.row_mut(i).iter_mut().zip(rotated) {
            *o = v as f32 + noise * rng.sample::<f32, _>(rand_distr::StandardNormal);
        }
    }
    (zs, zt, q)
}

#[test]
#[ignore]
fn dropout_and_seed_grid() {
    let (zs, zt, q) = planted_instance(300, 42, 0.01);
    let truth = AnchorLinkSet::identity(300, AnchorKind::GroundTruth);
    let p1 = |w: &MappingMatrix, retrieval: Retrieval| {
        let mapped = w.map_embeddings(&zs).unwrap();
        let ranked =
            rank_candidates(&mapped, &zt, retrieval, 10, Some(1), Execution::Parallel).unwrap();
        precision_at_n(&ranked, &truth, &[1]).unwrap()[&1]
    };
    for dropout in [0.3, 0.5, 0.7] {
        for seed in [1u64, 2, 3] {
            let cfg = AdvConfig {
                lr: 0.1,
                lr_decay: 0.999,
                batch: 64,
                epochs: 600,
                disc_steps_per_map_step: 1,
                beta: 0.01,
                seed,
                hidden: 256,
                leaky_slope: 0.2,
                input_dropout: dropout,
                smoothing: 0.2,
            };
            let (w, _) = train_adversarial(&zs, &zt, &cfg, Execution::Parallel).unwrap();
            let mut dist = w.matrix().clone();
            dist.add_scaled(&q, -1.0);
            let p_nn = p1(&w, Retrieval::Nn);
            let rcfg = RefineConfig { k: 10, threshold: None };
            let out = refine(&w, &zs, &zt, &rcfg, Execution::Parallel).unwrap();
            let p_ref = p1(&out.mapping, Retrieval::Cgss);
            println!(
                "dropout={dropout} seed={seed}: ||W-Q||={:.2} P@1(NN)={p_nn:.3} refined={p_ref:.3}",
                dist.frobenius_norm()
            );
        }
    }
}
