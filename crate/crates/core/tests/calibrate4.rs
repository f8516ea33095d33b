//! Diagnostics: gradient direction sanity + long small-batch runs.

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
    rotate: bool,
) -> (EmbeddingMatrix, EmbeddingMatrix, DenseMatrix) {
    let g = synth::barabasi_albert(n, 3, seed).unwrap();
    let cfg = WalkConfig { seed, ..WalkConfig::default() };
    let corpus = generate_walks(&g, &cfg, Execution::Parallel).unwrap();
    let zs = train_sgns(&corpus, &cfg, Execution::Sequential).unwrap();
    let q = if rotate { random_orthogonal(32, seed + 7) } else { DenseMatrix::identity(32) };
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

fn p_at_1(
    w: &MappingMatrix,
    zs: &EmbeddingMatrix,
    zt: &EmbeddingMatrix,
    retrieval: Retrieval,
) -> f64 {
    let mapped = w.map_embeddings(zs).unwrap();
    let ranked = rank_candidates(&mapped, zt, retrieval, 10, Some(1), Execution::Parallel).unwrap();
    let truth = AnchorLinkSet::identity(zs.len(), AnchorKind::GroundTruth);
    precision_at_n(&ranked, &truth, &[1]).unwrap()[&1]
}

#[test]
#[ignore]
fn identity_planting_keeps_optimum() {
    // Q = I: W starts AT the optimum. If training drives it away, the
    // update direction is wrong; if it stays near, dynamics are sane.
    let (zs, zt, _q) = planted_instance(300, 42, 0.01, false);
    let cfg = AdvConfig {
        lr: 0.1,
        lr_decay: 0.999,
        batch: 64,
        epochs: 300,
        disc_steps_per_map_step: 1,
        beta: 0.01,
        seed: 5,
        hidden: 256,
        leaky_slope: 0.2,
        input_dropout: 0.1,
        smoothing: 0.2,
    };
    let (w, _) = train_adversarial(&zs, &zt, &cfg, Execution::Parallel).unwrap();
    let mut dist = w.matrix().clone();
    dist.add_scaled(&DenseMatrix::identity(32), -1.0);
    let p = p_at_1(&w, &zs, &zt, Retrieval::Nn);
    println!("identity planting: ||W - I|| = {:.3}, P@1 = {p:.3}", dist.frobenius_norm());
}

#[test]
#[ignore]
fn muse_style_long_run() {
    let (zs, zt, q) = planted_instance(300, 42, 0.01, true);
    for (hidden, epochs, batch, lr) in
        [(1024usize, 2000usize, 32usize, 0.1f64), (2048, 1000, 32, 0.1)]
    {
        let cfg = AdvConfig {
            lr,
            lr_decay: 0.998,
            batch,
            epochs,
            disc_steps_per_map_step: 1,
            beta: 0.01,
            seed: 5,
            hidden,
            leaky_slope: 0.2,
            input_dropout: 0.1,
            smoothing: 0.2,
        };
        let t0 = std::time::Instant::now();
        let (w, hist) = train_adversarial(&zs, &zt, &cfg, Execution::Parallel).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let mut dist = w.matrix().clone();
        dist.add_scaled(&q, -1.0);
        let p_nn = p_at_1(&w, &zs, &zt, Retrieval::Nn);
        let rcfg = RefineConfig { k: 10, threshold: None };
        let out = refine(&w, &zs, &zt, &rcfg, Execution::Parallel).unwrap();
        let p_ref = p_at_1(&out.mapping, &zs, &zt, Retrieval::Cgss);
        let last = hist.last().unwrap();
        println!(
            "h={hidden} ep={epochs} b={batch}: ||W-Q||={:.2} P@1(NN)={p_nn:.3} refined={p_ref:.3} L_D={:.3} L_W={:.3} [{secs:.0}s]",
            dist.frobenius_norm(),
            last.disc_loss,
            last.map_loss
        );
    }
}
