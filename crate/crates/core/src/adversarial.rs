//! Adversarial learning of the linear map between two embedding spaces.
//!
//! A two-player game: a two-layer discriminator learns to tell mapped source
//! embeddings from target embeddings, while the mapping W is trained to fool
//! it. After every mapping step W is pulled back toward the orthogonal
//! manifold with the update `W <- (1+beta) W - beta (W W^T) W`.
//!
//! All math here is f64; analytic gradients are exact and checked against
//! central finite differences in the tests.

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::exec::{chunked_accumulate, derive_seed, map_indexed, Execution};
use crate::linalg::{dot, orthogonality_residual, DenseMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// The d x d linear map from the source embedding space to the target space.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    w: DenseMatrix,
}

impl MappingMatrix {
    pub fn identity(dim: usize) -> Self {
        MappingMatrix { w: DenseMatrix::identity(dim) }
    }

    pub fn from_matrix(w: DenseMatrix) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::DimensionMismatch(format!(
                "mapping must be square, got {}x{}",
                w.rows(),
                w.cols()
            )));
        }
        if !w.is_finite() {
            return Err(Error::NonFinite("mapping matrix"));
        }
        Ok(MappingMatrix { w })
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.w
    }

    /// `W z` for one embedding row.
    pub fn apply(&self, z: &[f32]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.w.row(i);
            *o = row.iter().zip(z).map(|(w, &x)| w * x as f64).sum();
        }
        out
    }

    /// Map every row of an embedding matrix (stored back as f32).
    pub fn map_embeddings(&self, em: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if em.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "mapping dim {} != embedding dim {}",
                self.dim(),
                em.dim()
            )));
        }
        let mut data = Vec::with_capacity(em.len() * em.dim());
        for i in 0..em.len() {
            data.extend(self.apply(em.row(i)).into_iter().map(|x| x as f32));
        }
        EmbeddingMatrix::from_rows(em.dim(), data, em.ids().to_vec())
    }

    pub fn orthogonality_residual(&self) -> f64 {
        orthogonality_residual(&self.w)
    }
}

/// One step of `W <- (1+beta) W - beta (W W^T) W`.
pub fn orthogonality_update(w: &MappingMatrix, beta: f64) -> MappingMatrix {
    let m = &w.w;
    let wwt = m.matmul_transb(m); // W W^T
    let mut next = m.clone();
    next.scale(1.0 + beta);
    next.add_scaled(&wwt.matmul(m), -beta);
    MappingMatrix { w: next }
}

/// Two-layer discriminator: `sigmoid(w2 . leaky_relu(W1 x + b1) + b2)`,
/// with input dropout and label smoothing applied during training.
#[derive(Debug, Clone)]
pub struct Discriminator {
    w1: DenseMatrix, // hidden x d
    b1: Vec<f64>,
    w2: Vec<f64>, // hidden
    b2: f64,
    pub leaky_slope: f64,
    pub input_dropout: f64,
    pub smoothing: f64,
}

const PROB_FLOOR: f64 = 1e-12;

impl Discriminator {
    pub fn new(
        input_dim: usize,
        hidden: usize,
        leaky_slope: f64,
        input_dropout: f64,
        smoothing: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x44_49_53_43])); // "DISC"
        let bound1 = 1.0 / (input_dim as f64).sqrt();
        let w1_data: Vec<f64> =
            (0..hidden * input_dim).map(|_| rng.gen_range(-bound1..bound1)).collect();
        let bound2 = 1.0 / (hidden as f64).sqrt();
        let w2: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-bound2..bound2)).collect();
        Discriminator {
            w1: DenseMatrix::from_vec(hidden, input_dim, w1_data).unwrap(),
            b1: vec![0.0; hidden],
            w2,
            b2: 0.0,
            leaky_slope,
            input_dropout,
            smoothing,
        }
    }

    /// Assemble a discriminator from explicit parameters (tests, file I/O).
    pub fn from_parts(
        w1: DenseMatrix,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
        leaky_slope: f64,
        input_dropout: f64,
        smoothing: f64,
    ) -> Result<Self> {
        if b1.len() != w1.rows() || w2.len() != w1.rows() {
            return Err(Error::DimensionMismatch(format!(
                "bias/output sizes {}/{} != hidden {}",
                b1.len(),
                w2.len(),
                w1.rows()
            )));
        }
        Ok(Discriminator { w1, b1, w2, b2, leaky_slope, input_dropout, smoothing })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn w1(&self) -> &DenseMatrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    pub fn param_count(&self) -> usize {
        self.hidden() * self.input_dim() + self.hidden() + self.hidden() + 1
    }

    /// P(source = 1 | x); always strictly inside (0, 1).
    pub fn predict(&self, x: &[f64]) -> f64 {
        let (p, _, _) = self.forward(x, None);
        p
    }

    /// Forward pass. `mask` (when given) zeroes dropped input coordinates and
    /// rescales kept ones by 1/(1-rate).
    fn forward(&self, x: &[f64], mask: Option<&[bool]>) -> (f64, Vec<f64>, Vec<f64>) {
        let input: Vec<f64> = match mask {
            Some(m) => {
                let keep_scale = 1.0 / (1.0 - self.input_dropout);
                x.iter().zip(m).map(|(&v, &keep)| if keep { v * keep_scale } else { 0.0 }).collect()
            }
            None => x.to_vec(),
        };
        let hidden = self.hidden();
        let mut pre = vec![0.0; hidden];
        for (i, p) in pre.iter_mut().enumerate() {
            *p = dot(self.w1.row(i), &input) + self.b1[i];
        }
        let act: Vec<f64> =
            pre.iter().map(|&a| if a > 0.0 { a } else { self.leaky_slope * a }).collect();
        let logit = dot(&self.w2, &act) + self.b2;
        let p = sigmoid(logit).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        (p, pre, input)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smoothed binary cross-entropy of a prediction against target `t`.
fn smoothed_bce(p: f64, t: f64, s: f64) -> f64 {
    let t = t * (1.0 - s) + (1.0 - t) * s;
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Discriminator objective: classify mapped source rows as 1 and target rows
/// as 0, with targets smoothed to `1-s` / `s`.
pub fn disc_loss(d: &Discriminator, mapped_source: &DenseMatrix, target: &DenseMatrix) -> Result<f64> {
    check_batches(d, mapped_source, target)?;
    let s = d.smoothing;
    let src: f64 = (0..mapped_source.rows())
        .map(|i| smoothed_bce(d.predict(mapped_source.row(i)), 1.0, s))
        .sum();
    let tgt: f64 =
        (0..target.rows()).map(|i| smoothed_bce(d.predict(target.row(i)), 0.0, s)).sum();
    Ok(src / mapped_source.rows() as f64 + tgt / target.rows() as f64)
}

/// Mapping objective: make mapped source rows look like targets. Only the
/// source term depends on W; label smoothing is a discriminator-side device
/// and is not applied here.
pub fn map_loss(d: &Discriminator, mapped_source: &DenseMatrix, target: &DenseMatrix) -> Result<f64> {
    check_batches(d, mapped_source, target)?;
    let src: f64 = (0..mapped_source.rows())
        .map(|i| smoothed_bce(d.predict(mapped_source.row(i)), 0.0, 0.0))
        .sum();
    let tgt: f64 =
        (0..target.rows()).map(|i| smoothed_bce(d.predict(target.row(i)), 1.0, 0.0)).sum();
    Ok(src / mapped_source.rows() as f64 + tgt / target.rows() as f64)
}

fn check_batches(d: &Discriminator, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if a.cols() != d.input_dim() || b.cols() != d.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "batch dims {}/{} != discriminator input dim {}",
            a.cols(),
            b.cols(),
            d.input_dim()
        )));
    }
    Ok(())
}

/// Flat gradient buffer for the discriminator parameters.
#[derive(Debug, Clone)]
pub struct DiscGradients {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

struct GradLayout {
    hidden: usize,
    dim: usize,
}

impl GradLayout {
    fn width(&self) -> usize {
        self.hidden * self.dim + 2 * self.hidden + 1
    }

    fn unflatten(&self, flat: &[f64]) -> DiscGradients {
        let hd = self.hidden * self.dim;
        DiscGradients {
            w1: DenseMatrix::from_vec(self.hidden, self.dim, flat[..hd].to_vec()).unwrap(),
            b1: flat[hd..hd + self.hidden].to_vec(),
            w2: flat[hd + self.hidden..hd + 2 * self.hidden].to_vec(),
            b2: flat[hd + 2 * self.hidden],
        }
    }
}

/// Backprop one sample into the flat gradient accumulator.
/// `dlogit` is dLoss/dlogit for this sample (already weighted by 1/batch).
fn accumulate_sample(
    d: &Discriminator,
    pre: &[f64],
    input: &[f64],
    dlogit: f64,
    acc: &mut [f64],
) {
    let hidden = d.hidden();
    let dim = d.input_dim();
    let act_of = |a: f64| if a > 0.0 { a } else { d.leaky_slope * a };
    let hd = hidden * dim;
    for i in 0..hidden {
        let da = dlogit * d.w2[i] * if pre[i] > 0.0 { 1.0 } else { d.leaky_slope };
        // dW1 row i += da * input
        let row = &mut acc[i * dim..(i + 1) * dim];
        for (r, &x) in row.iter_mut().zip(input) {
            *r += da * x;
        }
        acc[hd + i] += da; // db1
        acc[hd + hidden + i] += dlogit * act_of(pre[i]); // dw2
    }
    acc[hd + 2 * hidden] += dlogit; // db2
}

/// dLoss/dlogit of the smoothed BCE at prediction p and raw target t.
fn bce_dlogit(p: f64, t: f64, s: f64) -> f64 {
    p - (t * (1.0 - s) + (1.0 - t) * s)
}

/// Analytic parameter gradients of `disc_loss`. When `masks` are provided the
/// forward pass applies them (training-time dropout); pass None for exact
/// deterministic evaluation.
pub fn disc_loss_gradients(
    d: &Discriminator,
    mapped_source: &DenseMatrix,
    target: &DenseMatrix,
    masks: Option<(&[Vec<bool>], &[Vec<bool>])>,
    exec: Execution,
) -> Result<(f64, DiscGradients)> {
    check_batches(d, mapped_source, target)?;
    let layout = GradLayout { hidden: d.hidden(), dim: d.input_dim() };
    let s = d.smoothing;
    let n = mapped_source.rows();
    let m = target.rows();
    let total = n + m;

    // Chunked deterministic accumulation over the concatenated batches; the
    // last accumulator slot carries the loss.
    let width = layout.width() + 1;
    let flat = chunked_accumulate(exec, total, width, 64, |range, acc| {
        for idx in range {
            let (row, t, weight, mask) = if idx < n {
                let mask = masks.map(|(ms, _)| ms[idx].as_slice());
                (mapped_source.row(idx), 1.0, 1.0 / n as f64, mask)
            } else {
                let j = idx - n;
                let mask = masks.map(|(_, mt)| mt[j].as_slice());
                (target.row(j), 0.0, 1.0 / m as f64, mask)
            };
            let (p, pre, input) = d.forward(row, mask);
            acc[width - 1] += weight * smoothed_bce(p, t, s);
            let dlogit = weight * bce_dlogit(p, t, s);
            accumulate_sample(d, &pre, &input, dlogit, &mut acc[..width - 1]);
        }
    });
    Ok((flat[width - 1], layout.unflatten(&flat[..width - 1])))
}

/// Analytic input gradients of the W-dependent term of `map_loss`:
/// returns (full map loss, dLoss/dx for each mapped source row). The target
/// term is W-independent, so it contributes value but no gradient.
pub fn map_loss_input_gradients(
    d: &Discriminator,
    mapped_source: &DenseMatrix,
    target: &DenseMatrix,
    masks: Option<&[Vec<bool>]>,
    exec: Execution,
) -> Result<(f64, DenseMatrix)> {
    check_batches(d, mapped_source, target)?;
    let n = mapped_source.rows();
    let dim = d.input_dim();
    let keep_scale = 1.0 / (1.0 - d.input_dropout);

    let rows = map_indexed(exec, n, |i| {
        let mask = masks.map(|m| m[i].as_slice());
        let (p, pre, _input) = d.forward(mapped_source.row(i), mask);
        // Source term of L_W: -log(1 - p); d/dlogit = p.
        let dlogit = p / n as f64;
        let mut dx = vec![0.0; dim];
        for h in 0..d.hidden() {
            let da = dlogit * d.w2[h] * if pre[h] > 0.0 { 1.0 } else { d.leaky_slope };
            for (dxj, &w) in dx.iter_mut().zip(d.w1.row(h)) {
                *dxj += da * w;
            }
        }
        // Undo dropout's forward scaling on kept coordinates.
        if let Some(m) = mask {
            for (dxj, &keep) in dx.iter_mut().zip(m) {
                *dxj = if keep { *dxj * keep_scale } else { 0.0 };
            }
        }
        let src_loss = smoothed_bce(p, 0.0, 0.0) / n as f64;
        (src_loss, dx)
    });

    let mut grad = DenseMatrix::zeros(n, dim);
    let mut src_total = 0.0;
    for (i, (l, dx)) in rows.into_iter().enumerate() {
        src_total += l;
        grad.row_mut(i).copy_from_slice(&dx);
    }
    // The target term never passes through W: it adds loss value, never
    // gradient.
    let tgt_total: f64 = (0..target.rows())
        .map(|j| {
            let (p, _, _) = d.forward(target.row(j), None);
            smoothed_bce(p, 1.0, 0.0)
        })
        .sum::<f64>()
        / target.rows() as f64;
    Ok((src_total + tgt_total, grad))
}

/// Mapping initialization strategy for the adversarial phase.
///
/// Identity is the stable default for spaces that are already roughly
/// comparable. On small node sets (a few hundred points) the two-player game
/// has no long-range pull toward a distant rotation: the optimum is a stable
/// attractor, but plain SGD from identity never reaches its basin. The
/// spectral option closes that gap by aligning the second-moment eigenbases
/// first (signs disambiguated by per-axis third moments) and letting
/// adversarial training polish from there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MapInit {
    #[default]
    Identity,
    Spectral,
}

/// Hyperparameters of the adversarial phase. The discriminator architecture
/// and regularizers live here too so one struct configures the whole game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub batch: usize,
    pub epochs: usize,
    pub disc_steps_per_map_step: usize,
    pub beta: f64,
    pub seed: u64,
    pub hidden: usize,
    pub leaky_slope: f64,
    pub input_dropout: f64,
    pub smoothing: f64,
    #[serde(default)]
    pub init: MapInit,
}

impl Default for AdvConfig {
    fn default() -> Self {
        AdvConfig {
            lr: 1e-3,
            lr_decay: 0.95,
            batch: 1000,
            epochs: 50,
            disc_steps_per_map_step: 1,
            beta: 0.01,
            seed: 0,
            hidden: 2048,
            leaky_slope: 0.2,
            input_dropout: 0.1,
            smoothing: 0.2,
            init: MapInit::Identity,
        }
    }
}

impl AdvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument("lr must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument("lr_decay must be in (0, 1]".into()));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidArgument("beta must be >= 0".into()));
        }
        if self.batch == 0 || self.epochs == 0 || self.disc_steps_per_map_step == 0 {
            return Err(Error::InvalidArgument(
                "batch, epochs, disc_steps_per_map_step must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.input_dropout) {
            return Err(Error::InvalidArgument("input_dropout must be in [0, 1)".into()));
        }
        if !(0.0..0.5).contains(&self.smoothing) {
            return Err(Error::InvalidArgument("smoothing must be in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Per-epoch loss record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub disc_loss: f64,
    pub map_loss: f64,
    pub orth_residual: f64,
}

/// Spectral initialization of the mapping: align the eigenbases of the two
/// spaces' uncentered second-moment matrices, choosing each axis sign so the
/// per-axis third moments agree. Exact when the target space is an orthogonal
/// transform of the source space; a serviceable warm start otherwise.
pub fn spectral_init(zs: &EmbeddingMatrix, zt: &EmbeddingMatrix) -> Result<MappingMatrix> {
    if zs.dim() != zt.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source dim {} != target dim {}",
            zs.dim(),
            zt.dim()
        )));
    }
    let d = zs.dim();
    let second_moment = |em: &EmbeddingMatrix| -> DenseMatrix {
        let mut m = DenseMatrix::zeros(d, d);
        for i in 0..em.len() {
            let row = em.row(i);
            for a in 0..d {
                let ra = row[a] as f64;
                for b in 0..d {
                    let v = m.get(a, b) + ra * row[b] as f64;
                    m.set(a, b, v);
                }
            }
        }
        m.scale(1.0 / em.len() as f64);
        m
    };
    // Symmetric PSD: the SVD is the eigendecomposition, eigenvalues sorted
    // descending so axes correspond by rank.
    let es = crate::linalg::svd(&second_moment(zs))?;
    let et = crate::linalg::svd(&second_moment(zt))?;

    let skew = |em: &EmbeddingMatrix, basis: &DenseMatrix, axis: usize| -> f64 {
        let mut total = 0.0;
        for i in 0..em.len() {
            let mut proj = 0.0;
            for (a, &v) in em.row(i).iter().enumerate() {
                proj += v as f64 * basis.get(a, axis);
            }
            total += proj * proj * proj;
        }
        total / em.len() as f64
    };
    // W0 = Ut diag(sign) Us^T
    let mut signed_ut = et.u.clone();
    for k in 0..d {
        let agree = skew(zs, &es.u, k) * skew(zt, &et.u, k);
        if agree < 0.0 {
            for a in 0..d {
                let v = -signed_ut.get(a, k);
                signed_ut.set(a, k, v);
            }
        }
    }
    MappingMatrix::from_matrix(signed_ut.matmul(&es.u.transpose()))
}

const STREAM_BATCH: u64 = 0x42_41_54_43; // "BATC"
const STREAM_DROP: u64 = 0x44_52_4f_50; // "DROP"

/// Alternating adversarial training. Returns the learned mapping (initialized
/// at identity) and the per-epoch loss history.
pub fn train_adversarial(
    zs: &EmbeddingMatrix,
    zt: &EmbeddingMatrix,
    cfg: &AdvConfig,
    exec: Execution,
) -> Result<(MappingMatrix, Vec<EpochLoss>)> {
    cfg.validate()?;
    if zs.dim() != zt.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source dim {} != target dim {}",
            zs.dim(),
            zt.dim()
        )));
    }
    if zs.is_empty() || zt.is_empty() {
        return Err(Error::InvalidArgument("cannot train on empty embeddings".into()));
    }
    let dim = zs.dim();
    let n = zs.len();
    let m = zt.len();
    let batch = cfg.batch.min(n).min(m);

    let src64 = to_f64(zs);
    let tgt64 = to_f64(zt);

    let mut disc = Discriminator::new(
        dim,
        cfg.hidden,
        cfg.leaky_slope,
        cfg.input_dropout,
        cfg.smoothing,
        cfg.seed,
    );
    let mut w = match cfg.init {
        MapInit::Identity => MappingMatrix::identity(dim),
        MapInit::Spectral => spectral_init(zs, zt)?,
    };
    let mut lr = cfg.lr;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_BATCH]));

    let steps_per_epoch = n.max(m).div_ceil(batch);
    let mut global_step: u64 = 0;

    for epoch in 0..cfg.epochs {
        let mut src_order: Vec<usize> = (0..n).collect();
        let mut tgt_order: Vec<usize> = (0..m).collect();
        src_order.shuffle(&mut rng);
        tgt_order.shuffle(&mut rng);

        let mut epoch_disc = 0.0;
        let mut epoch_map = 0.0;
        let mut disc_evals = 0usize;
        let mut map_evals = 0usize;

        for step in 0..steps_per_epoch {
            for sub in 0..cfg.disc_steps_per_map_step {
                let (src_idx, tgt_idx) = pick_batches(
                    &src_order,
                    &tgt_order,
                    batch,
                    step * cfg.disc_steps_per_map_step + sub,
                );
                let mapped = map_rows(&w, &src64, &src_idx);
                let tgt_batch = gather(&tgt64, &tgt_idx);
                let (src_masks, tgt_masks) =
                    dropout_masks(cfg, global_step, dim, src_idx.len(), tgt_idx.len());
                let (loss, grads) = disc_loss_gradients(
                    &disc,
                    &mapped,
                    &tgt_batch,
                    Some((&src_masks, &tgt_masks)),
                    exec,
                )?;
                apply_disc_update(&mut disc, &grads, lr);
                epoch_disc += loss;
                disc_evals += 1;
                global_step += 1;
            }

            // Mapping step.
            let (src_idx, tgt_idx) = pick_batches(&src_order, &tgt_order, batch, step);
            let mapped = map_rows(&w, &src64, &src_idx);
            let tgt_batch = gather(&tgt64, &tgt_idx);
            let (src_masks, _) = dropout_masks(cfg, global_step, dim, src_idx.len(), 0);
            let (loss, input_grads) =
                map_loss_input_gradients(&disc, &mapped, &tgt_batch, Some(&src_masks), exec)?;
            // dL/dW = sum_i g_i z_i^T (the 1/n weight is inside g_i already).
            let mut dw = DenseMatrix::zeros(dim, dim);
            for (row, &src_row) in src_idx.iter().enumerate() {
                let g = input_grads.row(row);
                let z = &src64[src_row];
                for a in 0..dim {
                    if g[a] == 0.0 {
                        continue;
                    }
                    let out = dw.row_mut(a);
                    for (o, &zb) in out.iter_mut().zip(z) {
                        *o += g[a] * zb;
                    }
                }
            }
            let mut next = w.matrix().clone();
            next.add_scaled(&dw, -lr);
            w = MappingMatrix::from_matrix(next)?;
            w = orthogonality_update(&w, cfg.beta);
            epoch_map += loss;
            map_evals += 1;
            global_step += 1;
        }

        lr *= cfg.lr_decay;
        history.push(EpochLoss {
            epoch,
            disc_loss: epoch_disc / disc_evals.max(1) as f64,
            map_loss: epoch_map / map_evals.max(1) as f64,
            orth_residual: w.orthogonality_residual(),
        });
    }
    Ok((w, history))
}

fn to_f64(em: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    (0..em.len()).map(|i| em.row(i).iter().map(|&x| x as f64).collect()).collect()
}

fn gather(rows: &[Vec<f64>], idx: &[usize]) -> DenseMatrix {
    let dim = rows[0].len();
    let mut out = DenseMatrix::zeros(idx.len(), dim);
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(&rows[i]);
    }
    out
}

fn map_rows(w: &MappingMatrix, rows: &[Vec<f64>], idx: &[usize]) -> DenseMatrix {
    let dim = w.dim();
    let mut out = DenseMatrix::zeros(idx.len(), dim);
    for (r, &i) in idx.iter().enumerate() {
        let z = &rows[i];
        let out_row = out.row_mut(r);
        for (a, o) in out_row.iter_mut().enumerate() {
            *o = dot(w.matrix().row(a), z);
        }
    }
    out
}

/// Consecutive slices of the per-epoch shuffles, wrapping modulo each side.
fn pick_batches(
    src_order: &[usize],
    tgt_order: &[usize],
    batch: usize,
    step: usize,
) -> (Vec<usize>, Vec<usize>) {
    let take = |order: &[usize]| -> Vec<usize> {
        (0..batch).map(|k| order[(step * batch + k) % order.len()]).collect()
    };
    (take(src_order), take(tgt_order))
}

fn dropout_masks(
    cfg: &AdvConfig,
    step: u64,
    dim: usize,
    n_src: usize,
    n_tgt: usize,
) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let make = |side: u64, count: usize| -> Vec<Vec<bool>> {
        (0..count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    cfg.seed,
                    &[STREAM_DROP, step, side, i as u64],
                ));
                (0..dim).map(|_| rng.gen::<f64>() >= cfg.input_dropout).collect()
            })
            .collect()
    };
    (make(0, n_src), make(1, n_tgt))
}

fn apply_disc_update(d: &mut Discriminator, g: &DiscGradients, lr: f64) {
    d.w1.add_scaled(&g.w1, -lr);
    for (b, gb) in d.b1.iter_mut().zip(&g.b1) {
        *b -= lr * gb;
    }
    for (w, gw) in d.w2.iter_mut().zip(&g.w2) {
        *w -= lr * gw;
    }
    d.b2 -= lr * g.b2;
}

/// Mapping file: text, first line `d d`, then d rows of d floats.
pub fn write_mapping_text<W: Write>(w: &MappingMatrix, mut out: W) -> Result<()> {
    let d = w.dim();
    writeln!(out, "{d} {d}")?;
    for i in 0..d {
        let row: Vec<String> = w.matrix().row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_mapping_text<R: Read>(r: R) -> Result<MappingMatrix> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty mapping file".into() })??;
    let dims: Vec<usize> = header.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::Parse { line: 1, msg: "expected square `d d` header".into() });
    }
    let d = dims[0];
    let mut data = Vec::with_capacity(d * d);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 2,
                msg: format!("bad float `{tok}`"),
            })?;
            data.push(v);
        }
    }
    MappingMatrix::from_matrix(DenseMatrix::from_vec(d, d, data)?)
}

/// Binary mapping variant: u64 rows, u64 cols, f64 little-endian entries.
/// Round-trips bit-exactly.
pub fn write_mapping_binary<W: Write>(w: &MappingMatrix, mut out: W) -> Result<()> {
    out.write_all(&(w.dim() as u64).to_le_bytes())?;
    out.write_all(&(w.dim() as u64).to_le_bytes())?;
    for v in w.matrix().data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_mapping_binary<R: Read>(mut r: R) -> Result<MappingMatrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    let rows = u64::from_le_bytes(header[..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; rows * cols * 8];
    r.read_exact(&mut buf)?;
    let data: Vec<f64> =
        buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    MappingMatrix::from_matrix(DenseMatrix::from_vec(rows, cols, data)?)
}

pub fn write_mapping_file(w: &MappingMatrix, path: &Path) -> Result<()> {
    write_mapping_text(w, BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_mapping_file(path: &Path) -> Result<MappingMatrix> {
    read_mapping_text(std::fs::File::open(path)?)
}

/// Loss history CSV: `epoch,L_D,L_W,orth_residual`.
pub fn write_loss_history<W: Write>(history: &[EpochLoss], mut out: W) -> Result<()> {
    writeln!(out, "epoch,L_D,L_W,orth_residual")?;
    for e in history {
        writeln!(out, "{},{},{},{}", e.epoch, e.disc_loss, e.map_loss, e.orth_residual)?;
    }
    Ok(())
}
