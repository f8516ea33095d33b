//! Mapping refinement: CGSS similarity, mutual-nearest-neighbor pseudo-anchor
//! mining, and the closed-form orthogonal Procrustes solve.
//!
//! CGSS (cross-graph similarity scaling) corrects hubness by penalizing each
//! endpoint's mean cosine to its K nearest cross-graph neighbors:
//! `CGSS(Wz_s, z_t) = 2 cos(Wz_s, z_t) - r_T(Wz_s) - r_S(z_t)`.

use crate::adversarial::MappingMatrix;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::graph::{AnchorKind, AnchorLinkSet};
use crate::linalg::{cosine, svd, DenseMatrix};
use serde::{Deserialize, Serialize};

/// Per-row mean similarity to the K nearest cross-graph neighbors, for both
/// directions, plus copies of the two spaces so scores can be recomputed.
#[derive(Debug, Clone)]
pub struct CgssIndex {
    k: usize,
    shortfall: bool,
    r_source: Vec<f64>,
    r_target: Vec<f64>,
    mapped: EmbeddingMatrix,
    target: EmbeddingMatrix,
}

impl CgssIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    /// True when a side had fewer than K candidates, so means were taken over
    /// all of them.
    pub fn shortfall(&self) -> bool {
        self.shortfall
    }

    pub fn r_source(&self) -> &[f64] {
        &self.r_source
    }

    pub fn r_target(&self) -> &[f64] {
        &self.r_target
    }

    pub fn source_len(&self) -> usize {
        self.mapped.len()
    }

    pub fn target_len(&self) -> usize {
        self.target.len()
    }

    /// CGSS between mapped source row `i` and target row `j`.
    pub fn score(&self, i: usize, j: usize) -> f64 {
        let c = cosine(self.mapped.row(i), self.target.row(j));
        self.score_with_cosine(i, j, c)
    }

    #[inline]
    pub fn score_with_cosine(&self, i: usize, j: usize, cos_ij: f64) -> f64 {
        2.0 * cos_ij - self.r_source[i] - self.r_target[j]
    }
}

/// Mean of the K largest cosines from `query` to every row of `others`.
/// Sums in descending value order so the result does not depend on selection
/// internals.
fn mean_top_k(query: &[f32], others: &EmbeddingMatrix, k: usize) -> f64 {
    let mut sims: Vec<f64> = (0..others.len()).map(|j| cosine(query, others.row(j))).collect();
    let take = k.min(sims.len());
    if take < sims.len() {
        sims.select_nth_unstable_by(take - 1, |a, b| b.partial_cmp(a).unwrap());
        sims.truncate(take);
    }
    sims.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sims.iter().sum::<f64>() / take as f64
}

/// Build the bipartite K-neighborhood index between a mapped source space and
/// a target space. Row-parallel.
pub fn build_cgss_index(
    mapped_source: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    k: usize,
    exec: Execution,
) -> Result<CgssIndex> {
    if k == 0 {
        return Err(Error::InvalidArgument("CGSS neighborhood size K must be >= 1".into()));
    }
    if mapped_source.is_empty() || target.is_empty() {
        return Err(Error::InvalidArgument("CGSS index needs nonempty spaces".into()));
    }
    if mapped_source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "mapped source dim {} != target dim {}",
            mapped_source.dim(),
            target.dim()
        )));
    }
    let src_rows: Vec<usize> = (0..mapped_source.len()).collect();
    let r_source = map_slice(exec, &src_rows, |&i| mean_top_k(mapped_source.row(i), target, k));
    let tgt_rows: Vec<usize> = (0..target.len()).collect();
    let r_target = map_slice(exec, &tgt_rows, |&j| mean_top_k(target.row(j), mapped_source, k));
    let shortfall = k > mapped_source.len() || k > target.len();
    Ok(CgssIndex {
        k,
        shortfall,
        r_source,
        r_target,
        mapped: mapped_source.clone(),
        target: target.clone(),
    })
}

/// Mine pseudo anchors: (i, j) is selected iff j is i's CGSS argmax, i is j's
/// CGSS argmax, and (when a threshold is set) CGSS(i, j) exceeds it. Argmax
/// ties break toward the lowest candidate id. Mutual argmax is injective, so
/// the result satisfies the point-to-point invariant by construction.
pub fn mine_pseudo_anchors(
    idx: &CgssIndex,
    threshold: Option<f64>,
    exec: Execution,
) -> Result<(AnchorLinkSet, Vec<f64>)> {
    if let Some(t) = threshold {
        if !(-2.0..=2.0).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "threshold {t} outside the practical CGSS range [-2, 2]"
            )));
        }
    }
    let n = idx.source_len();
    let m = idx.target_len();

    // Row chunks: each yields (per-row best j, per-column best (score, i)
    // within the chunk); chunks merge in order so the lowest i wins ties.
    let chunk_size = 64usize;
    let chunks: Vec<std::ops::Range<usize>> =
        (0..n).step_by(chunk_size).map(|s| s..(s + chunk_size).min(n)).collect();
    type ChunkBest = (Vec<(usize, f64)>, Vec<(f64, usize)>);
    let partials: Vec<ChunkBest> = map_slice(exec, &chunks, |range| {
        let mut row_best = Vec::with_capacity(range.len());
        let mut col_best: Vec<(f64, usize)> = vec![(f64::NEG_INFINITY, usize::MAX); m];
        for i in range.clone() {
            let mut best_j = 0usize;
            let mut best_score = f64::NEG_INFINITY;
            for (j, cb) in col_best.iter_mut().enumerate() {
                let score = idx.score(i, j);
                if score > best_score {
                    best_score = score;
                    best_j = j;
                }
                if score > cb.0 {
                    *cb = (score, i);
                }
            }
            row_best.push((best_j, best_score));
        }
        (row_best, col_best)
    });

    let mut best_for_source: Vec<(usize, f64)> = Vec::with_capacity(n);
    let mut best_for_target: Vec<(f64, usize)> = vec![(f64::NEG_INFINITY, usize::MAX); m];
    for (row_best, col_best) in partials {
        best_for_source.extend(row_best);
        for (acc, cand) in best_for_target.iter_mut().zip(col_best) {
            if cand.0 > acc.0 {
                *acc = cand;
            }
        }
    }

    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for (i, &(j, score)) in best_for_source.iter().enumerate() {
        if best_for_target[j].1 != i {
            continue;
        }
        if let Some(t) = threshold {
            if score <= t {
                continue;
            }
        }
        pairs.push((i, j));
        scores.push(score);
    }
    Ok((AnchorLinkSet::new(pairs, AnchorKind::Pseudo)?, scores))
}

/// Orthogonal Procrustes: the orthogonal W minimizing ||W X - Y||_F, obtained
/// in closed form as U V^T from the SVD of Y X^T. Columns of `x`/`y` are
/// paired anchor embeddings.
pub fn procrustes(x: &DenseMatrix, y: &DenseMatrix) -> Result<MappingMatrix> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::DimensionMismatch(format!(
            "anchor matrices {}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    if x.cols() == 0 {
        return Err(Error::InvalidArgument("procrustes needs at least one anchor column".into()));
    }
    let zero = |m: &DenseMatrix| m.data().iter().all(|&v| v == 0.0);
    if zero(x) || zero(y) {
        return Err(Error::InvalidArgument("procrustes input is all zero".into()));
    }
    if x.cols() < x.rows() {
        log::warn!(
            "procrustes with {} anchors for dimension {} is rank-deficient",
            x.cols(),
            x.rows()
        );
    }
    let m = y.matmul_transb(x); // Y X^T, d x d
    let s = svd(&m)?;
    MappingMatrix::from_matrix(s.u.matmul(&s.v.transpose()))
}

/// Assemble the d x k anchor matrices (columns = paired embeddings) from an
/// anchor set over two embedding spaces.
pub fn anchor_matrices(
    zs: &EmbeddingMatrix,
    zt: &EmbeddingMatrix,
    anchors: &AnchorLinkSet,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if anchors.is_empty() {
        return Err(Error::InvalidArgument("empty anchor set".into()));
    }
    let d = zs.dim();
    let k = anchors.len();
    let mut x = DenseMatrix::zeros(d, k);
    let mut y = DenseMatrix::zeros(d, k);
    for (col, &(s, t)) in anchors.pairs().iter().enumerate() {
        for (row, &v) in zs.row(s).iter().enumerate() {
            x.set(row, col, v as f64);
        }
        for (row, &v) in zt.row(t).iter().enumerate() {
            y.set(row, col, v as f64);
        }
    }
    Ok((x, y))
}

/// Refinement configuration: CGSS neighborhood size and the selection
/// threshold (None disables the threshold, keeping pure mutual-NN mining).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub k: usize,
    pub threshold: Option<f64>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { k: 10, threshold: Some(0.7) }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub mapping: MappingMatrix,
    pub anchors: AnchorLinkSet,
    pub scores: Vec<f64>,
    /// True when mining produced nothing and the input mapping was returned
    /// unchanged.
    pub no_anchors: bool,
}

/// One refinement round: map the source space with `w`, build the CGSS index,
/// mine mutual-NN pseudo anchors, and re-solve W by Procrustes on them.
/// Callable iteratively; every call re-mines with the latest mapping.
pub fn refine(
    w: &MappingMatrix,
    zs: &EmbeddingMatrix,
    zt: &EmbeddingMatrix,
    cfg: &RefineConfig,
    exec: Execution,
) -> Result<RefineOutcome> {
    let mapped = w.map_embeddings(zs)?;
    let idx = build_cgss_index(&mapped, zt, cfg.k, exec)?;
    let (anchors, scores) = mine_pseudo_anchors(&idx, cfg.threshold, exec)?;
    if anchors.is_empty() {
        log::warn!("refinement mined zero pseudo anchors; returning mapping unchanged");
        return Ok(RefineOutcome { mapping: w.clone(), anchors, scores, no_anchors: true });
    }
    let (x, y) = anchor_matrices(zs, zt, &anchors)?;
    let mapping = procrustes(&x, &y)?;
    Ok(RefineOutcome { mapping, anchors, scores, no_anchors: false })
}

/// Retrieval rule used when ranking target candidates for a source node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retrieval {
    /// Raw cosine nearest neighbors.
    Nn,
    /// CGSS-corrected ranking.
    Cgss,
}

/// Rank target candidates for every mapped source row, descending by the
/// chosen similarity, ties by ascending target id. `limit` truncates each
/// list (None keeps all targets).
pub fn rank_candidates(
    mapped_source: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    retrieval: Retrieval,
    cgss_k: usize,
    limit: Option<usize>,
    exec: Execution,
) -> Result<Vec<Vec<usize>>> {
    let idx = match retrieval {
        Retrieval::Cgss => Some(build_cgss_index(mapped_source, target, cgss_k, exec)?),
        Retrieval::Nn => None,
    };
    let rows: Vec<usize> = (0..mapped_source.len()).collect();
    let m = target.len();
    let keep = limit.unwrap_or(m).min(m);
    Ok(map_slice(exec, &rows, |&i| {
        let mut scored: Vec<(usize, f64)> = (0..m)
            .map(|j| {
                let c = cosine(mapped_source.row(i), target.row(j));
                let s = match &idx {
                    Some(idx) => idx.score_with_cosine(i, j, c),
                    None => c,
                };
                (j, s)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(keep);
        scored.into_iter().map(|(j, _)| j).collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_orthogonal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_embedding(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        EmbeddingMatrix::from_rows(d, data, (0..n).map(|i| i.to_string()).collect()).unwrap()
    }

    /// Independent cosine for the oracles below.
    fn oracle_cosine(a: &[f32], b: &[f32]) -> f64 {
        let mut num = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..a.len() {
            num += a[i] as f64 * b[i] as f64;
            na += (a[i] as f64) * (a[i] as f64);
            nb += (b[i] as f64) * (b[i] as f64);
        }
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            num / (na.sqrt() * nb.sqrt())
        }
    }

    fn oracle_mean_top_k(query: &[f32], others: &EmbeddingMatrix, k: usize) -> f64 {
        let mut sims: Vec<f64> =
            (0..others.len()).map(|j| oracle_cosine(query, others.row(j))).collect();
        sims.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let take = k.min(sims.len());
        sims[..take].iter().sum::<f64>() / take as f64
    }

    #[test]
    fn cgss_index_singletons_k1() {
        let a = random_embedding(1, 8, 1);
        let b = random_embedding(1, 8, 2);
        let idx = build_cgss_index(&a, &b, 1, Execution::Sequential).unwrap();
        let c = cosine(a.row(0), b.row(0));
        assert_eq!(idx.r_source()[0], c);
        assert_eq!(idx.r_target()[0], c);
        assert!((idx.score(0, 0) - 0.0).abs() < 1e-15); // 2c - c - c
    }

    #[test]
    fn cgss_index_identical_vectors_all_r_one() {
        let mut em = EmbeddingMatrix::zeros(5, 4);
        for i in 0..5 {
            em.row_mut(i).copy_from_slice(&[0.5, -0.25, 1.0, 2.0]);
        }
        let idx = build_cgss_index(&em, &em, 3, Execution::Sequential).unwrap();
        for &r in idx.r_source().iter().chain(idx.r_target()) {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cgss_index_matches_brute_force_oracle() {
        for (seed, k) in [(1u64, 1usize), (2, 5), (3, 10)] {
            let a = random_embedding(50, 8, seed);
            let b = random_embedding(50, 8, seed + 100);
            let idx = build_cgss_index(&a, &b, k, Execution::Sequential).unwrap();
            for i in 0..50 {
                assert_eq!(idx.r_source()[i], oracle_mean_top_k(a.row(i), &b, k), "r_T row {i}");
            }
            for j in 0..50 {
                assert_eq!(idx.r_target()[j], oracle_mean_top_k(b.row(j), &a, k), "r_S row {j}");
            }
        }
    }

    #[test]
    fn cgss_formula_direct_arithmetic() {
        // cos 0.9, r_T 0.5, r_S 0.3 -> 1.0
        let idx = CgssIndex {
            k: 1,
            shortfall: false,
            r_source: vec![0.5],
            r_target: vec![0.3],
            mapped: EmbeddingMatrix::zeros(1, 2),
            target: EmbeddingMatrix::zeros(1, 2),
        };
        assert!((idx.score_with_cosine(0, 0, 0.9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cgss_anti_hub_property() {
        // Raising r_S(z_t) by delta lowers CGSS(., z_t) by exactly delta.
        let a = random_embedding(10, 6, 5);
        let b = random_embedding(12, 6, 6);
        let mut idx = build_cgss_index(&a, &b, 3, Execution::Sequential).unwrap();
        let before = idx.score(4, 7);
        let delta = 0.125;
        idx.r_target[7] += delta;
        let after = idx.score(4, 7);
        assert!((before - after - delta).abs() < 1e-12);
    }

    #[test]
    fn shortfall_flagged_when_k_exceeds_candidates() {
        let a = random_embedding(3, 4, 1);
        let b = random_embedding(3, 4, 2);
        let idx = build_cgss_index(&a, &b, 10, Execution::Sequential).unwrap();
        assert!(idx.shortfall());
        // Means taken over all 3 candidates.
        assert_eq!(idx.r_source()[0], oracle_mean_top_k(a.row(0), &b, 3));
    }

    #[test]
    fn mine_identity_spaces_selects_every_pair() {
        // Target = mapped source. At d=32 random rows are near-orthogonal, so
        // each row's own copy (cosine 1) dominates: CGSS = 2 - r_T - r_S >= 0,
        // all pairs mutual, and all clear the 0.7 threshold.
        let a = random_embedding(20, 32, 9);
        let idx = build_cgss_index(&a, &a, 5, Execution::Sequential).unwrap();
        let (anchors, scores) =
            mine_pseudo_anchors(&idx, Some(0.7), Execution::Sequential).unwrap();
        assert_eq!(anchors.len(), 20);
        for (p, &(s, t)) in anchors.pairs().iter().enumerate() {
            assert_eq!(s, t);
            let expected = 2.0 - idx.r_source()[s] - idx.r_target()[t];
            assert!((scores[p] - expected).abs() < 1e-12);
            assert!(scores[p] > 0.7);
        }
    }

    /// O(n^2) double-argmax oracle over a full CGSS matrix.
    fn oracle_mutual_argmax(
        a: &EmbeddingMatrix,
        b: &EmbeddingMatrix,
        k: usize,
        threshold: Option<f64>,
    ) -> Vec<(usize, usize)> {
        let n = a.len();
        let m = b.len();
        let rt: Vec<f64> = (0..n).map(|i| oracle_mean_top_k(a.row(i), b, k)).collect();
        let rs: Vec<f64> = (0..m).map(|j| oracle_mean_top_k(b.row(j), a, k)).collect();
        let score = |i: usize, j: usize| 2.0 * oracle_cosine(a.row(i), b.row(j)) - rt[i] - rs[j];
        let mut out = Vec::new();
        for i in 0..n {
            let mut bj = 0;
            for j in 1..m {
                if score(i, j) > score(i, bj) {
                    bj = j;
                }
            }
            let mut bi = 0;
            for i2 in 1..n {
                if score(i2, bj) > score(bi, bj) {
                    bi = i2;
                }
            }
            if bi == i && threshold.map_or(true, |t| score(i, bj) > t) {
                out.push((i, bj));
            }
        }
        out
    }

    #[test]
    fn mine_matches_double_argmax_oracle() {
        let a = random_embedding(30, 8, 21);
        let b = random_embedding(30, 8, 22);
        let idx = build_cgss_index(&a, &b, 5, Execution::Sequential).unwrap();
        for threshold in [None, Some(0.0), Some(-1.0)] {
            let (anchors, _) = mine_pseudo_anchors(&idx, threshold, Execution::Sequential).unwrap();
            let expected = oracle_mutual_argmax(&a, &b, 5, threshold);
            assert_eq!(anchors.pairs(), &expected[..], "threshold {threshold:?}");
        }
    }

    #[test]
    fn mine_rejects_out_of_range_threshold() {
        let a = random_embedding(4, 4, 1);
        let idx = build_cgss_index(&a, &a, 2, Execution::Sequential).unwrap();
        assert!(mine_pseudo_anchors(&idx, Some(3.0), Execution::Sequential).is_err());
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn procrustes_identity_when_y_equals_x() {
        let x = random_matrix(8, 20, 3);
        let w = procrustes(&x, &x).unwrap();
        let mut diff = w.matrix().clone();
        diff.add_scaled(&DenseMatrix::identity(8), -1.0);
        assert!(diff.frobenius_norm() < 1e-10);
    }

    #[test]
    fn procrustes_recovers_planted_rotation() {
        let d = 32;
        let x = random_matrix(d, 64, 5);
        let q = random_orthogonal(d, 6);
        let y = q.matmul(&x);
        let w = procrustes(&x, &y).unwrap();
        assert_eq!(w.dim(), 32);
        let mut diff = w.matrix().clone();
        diff.add_scaled(&q, -1.0);
        assert!(diff.frobenius_norm() < 1e-6, "residual {}", diff.frobenius_norm());
        assert!(w.orthogonality_residual() < 1e-8);
    }

    #[test]
    fn procrustes_optimality_against_sampled_rotations() {
        let d = 8;
        let x = random_matrix(d, 30, 7);
        let y = random_matrix(d, 30, 8);
        let w = procrustes(&x, &y).unwrap();
        let objective = |m: &DenseMatrix| {
            let mut r = m.matmul(&x);
            r.add_scaled(&y, -1.0);
            r.frobenius_norm()
        };
        let best = objective(w.matrix());
        for seed in 0..100 {
            let q = random_orthogonal(d, 1000 + seed);
            assert!(best <= objective(&q) + 1e-12, "beaten by sampled rotation {seed}");
        }
    }

    #[test]
    fn procrustes_rank_deficient_still_orthogonal() {
        let x = random_matrix(4, 2, 9);
        let y = random_matrix(4, 2, 10);
        let w = procrustes(&x, &y).unwrap();
        assert!(w.orthogonality_residual() < 1e-8);
    }

    #[test]
    fn procrustes_rejects_all_zero() {
        let x = DenseMatrix::zeros(4, 3);
        let y = random_matrix(4, 3, 2);
        assert!(procrustes(&x, &y).is_err());
        assert!(procrustes(&y, &x).is_err());
    }

    /// Planted rotation fixture shared by the refine tests: target space is a
    /// rotated copy of the source space.
    fn planted(n: usize, d: usize, seed: u64) -> (EmbeddingMatrix, EmbeddingMatrix, DenseMatrix) {
        let zs = random_embedding(n, d, seed);
        let q = random_orthogonal(d, seed + 1);
        let mut zt = EmbeddingMatrix::zeros(n, d);
        for i in 0..n {
            let z64: Vec<f64> = zs.row(i).iter().map(|&x| x as f64).collect();
            let mapped = q.mul_vec(&z64);
            for (o, v) in zt.row_mut(i).iter_mut().zip(mapped) {
                *o = v as f32;
            }
        }
        (zs, zt, q)
    }

    #[test]
    fn refine_is_idempotent_at_the_optimum() {
        let (zs, zt, q) = planted(60, 16, 31);
        let w = MappingMatrix::from_matrix(q.clone()).unwrap();
        let cfg = RefineConfig { k: 5, threshold: None };
        let out = refine(&w, &zs, &zt, &cfg, Execution::Sequential).unwrap();
        assert!(!out.no_anchors);
        assert_eq!(out.anchors.len(), 60);
        let mut diff = out.mapping.matrix().clone();
        diff.add_scaled(&q, -1.0);
        assert!(diff.frobenius_norm() < 1e-6, "residual {}", diff.frobenius_norm());
    }

    #[test]
    fn refine_recovers_from_perturbed_mapping() {
        let (zs, zt, q) = planted(80, 16, 33);
        // ||delta||_F = 0.1 perturbation away from the optimum.
        let noise = random_matrix(16, 16, 34);
        let mut perturbed = q.clone();
        let scale = 0.1 / noise.frobenius_norm();
        perturbed.add_scaled(&noise, scale);
        let w = MappingMatrix::from_matrix(perturbed.clone()).unwrap();
        let cfg = RefineConfig { k: 5, threshold: None };
        let out = refine(&w, &zs, &zt, &cfg, Execution::Sequential).unwrap();
        let dist = |m: &DenseMatrix| {
            let mut d = m.clone();
            d.add_scaled(&q, -1.0);
            d.frobenius_norm()
        };
        assert!(dist(out.mapping.matrix()) < dist(&perturbed));
    }

    #[test]
    fn refine_with_impossible_threshold_returns_unchanged() {
        let (zs, zt, _) = planted(10, 8, 35);
        let w = MappingMatrix::identity(8);
        let cfg = RefineConfig { k: 3, threshold: Some(2.0) };
        let out = refine(&w, &zs, &zt, &cfg, Execution::Sequential).unwrap();
        assert!(out.no_anchors);
        assert_eq!(out.mapping, w);
    }

    #[test]
    fn rank_candidates_nn_matches_sort_oracle() {
        let a = random_embedding(15, 8, 41);
        let b = random_embedding(20, 8, 42);
        let ranked =
            rank_candidates(&a, &b, Retrieval::Nn, 5, None, Execution::Sequential).unwrap();
        for i in 0..15 {
            let mut oracle: Vec<(usize, f64)> =
                (0..20).map(|j| (j, oracle_cosine(a.row(i), b.row(j)))).collect();
            oracle.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
            let expected: Vec<usize> = oracle.into_iter().map(|(j, _)| j).collect();
            assert_eq!(ranked[i], expected);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_mining_agree() {
        let a = random_embedding(100, 8, 51);
        let b = random_embedding(90, 8, 52);
        let idx_seq = build_cgss_index(&a, &b, 10, Execution::Sequential).unwrap();
        let idx_par = build_cgss_index(&a, &b, 10, Execution::Parallel).unwrap();
        assert_eq!(idx_seq.r_source(), idx_par.r_source());
        assert_eq!(idx_seq.r_target(), idx_par.r_target());
        let (seq, _) = mine_pseudo_anchors(&idx_seq, Some(0.0), Execution::Sequential).unwrap();
        let (par, _) = mine_pseudo_anchors(&idx_par, Some(0.0), Execution::Parallel).unwrap();
        assert_eq!(seq, par);
    }
}
