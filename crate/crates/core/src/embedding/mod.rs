//! Node embeddings from truncated random walks trained with skip-gram and
//! negative sampling.
//!
//! Walk generation derives an independent RNG stream per (pass, start node),
//! so the corpus is bit-identical whether walks are generated sequentially or
//! in parallel. Training is exactly reproducible in `Execution::Sequential`
//! mode; `Execution::Parallel` runs asynchronous updates over a shared
//! parameter store (benign races, nondeterministic results).

pub mod io;

use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_slice, Execution};
use crate::graph::Graph;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

/// Per-graph node embeddings: |V| rows of dimension `dim`, with a row id to
/// node id map.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            data: vec![0.0; rows * dim],
            ids: (0..rows).map(|i| i.to_string()).collect(),
        }
    }

    pub fn from_rows(dim: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        if data.len() != dim * ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "embedding data length {} != {} rows x {} dim",
                data.len(),
                ids.len(),
                dim
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding rows"));
        }
        Ok(EmbeddingMatrix { dim, data, ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Node ids, one per row.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn set_ids(&mut self, ids: Vec<String>) -> Result<()> {
        if ids.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                self.len()
            )));
        }
        self.ids = ids;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Configuration for walk generation and skip-gram training.
///
/// `window` and `dim` follow the standard setup (window 5, dimension 32); the
/// remaining values are conventional DeepWalk/SGNS defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 40,
            window: 5,
            dim: 32,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::InvalidArgument("window must be >= 1".into()));
        }
        if self.walk_length <= self.window {
            return Err(Error::InvalidArgument("walk_length must exceed window".into()));
        }
        if self.dim < 2 {
            return Err(Error::InvalidArgument("dim must be >= 2".into()));
        }
        if self.walks_per_node == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("walks_per_node and epochs must be >= 1".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(Error::InvalidArgument("initial_lr must be positive".into()));
        }
        Ok(())
    }
}

/// A corpus of truncated random walks over a graph's node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub node_count: usize,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

const STREAM_WALK_ORDER: u64 = 0x57_41_4c_4b; // "WALK"
const STREAM_WALK_STEPS: u64 = 0x53_54_45_50; // "STEP"
const STREAM_INIT: u64 = 0x49_4e_49_54; // "INIT"
const STREAM_TRAIN: u64 = 0x54_52_41_49; // "TRAI"

/// Generate `walks_per_node` uniform random walks of `walk_length` nodes from
/// every non-isolated node. Node order is shuffled per pass; isolated nodes
/// are skipped.
pub fn generate_walks(g: &Graph, cfg: &WalkConfig, exec: Execution) -> Result<WalkCorpus> {
    cfg.validate()?;
    let starts: Vec<usize> = (0..g.node_count()).filter(|&v| g.degree(v) > 0).collect();
    if starts.is_empty() {
        return Err(Error::EmptyGraph("all nodes are isolated; no walks possible".into()));
    }
    let mut walks = Vec::with_capacity(starts.len() * cfg.walks_per_node);
    for pass in 0..cfg.walks_per_node {
        let mut order = starts.clone();
        let mut order_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_WALK_ORDER, pass as u64]));
        order.shuffle(&mut order_rng);
        let pass_walks = map_slice(exec, &order, |&start| {
            let seed = derive_seed(cfg.seed, &[STREAM_WALK_STEPS, pass as u64, start as u64]);
            random_walk(g, start, cfg.walk_length, seed)
        });
        walks.extend(pass_walks);
    }
    Ok(WalkCorpus { walks, node_count: g.node_count() })
}

fn random_walk(g: &Graph, start: usize, length: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    let mut current = start;
    for _ in 1..length {
        let neighbors = g.neighbors(current);
        if neighbors.is_empty() {
            break;
        }
        current = neighbors[rng.gen_range(0..neighbors.len())];
        walk.push(current);
    }
    walk
}

/// Cumulative unigram^(3/4) table for negative sampling.
struct NegativeTable {
    nodes: Vec<usize>,
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeTable {
    fn build(counts: &[usize]) -> Self {
        let mut nodes = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (node, &c) in counts.iter().enumerate() {
            if c > 0 {
                total += (c as f64).powf(0.75);
                nodes.push(node);
                cumulative.push(total);
            }
        }
        NegativeTable { nodes, cumulative, total }
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let x = rng.gen_range(0.0..self.total);
        let idx = self.cumulative.partition_point(|&c| c <= x);
        self.nodes[idx.min(self.nodes.len() - 1)]
    }
}

const MIN_LR: f32 = 1e-4;

#[inline]
fn sigmoid(x: f32) -> f32 {
    let x = x.clamp(-30.0, 30.0);
    1.0 / (1.0 + (-x).exp())
}

/// Shared parameter store. Relaxed atomics compile to plain loads/stores, so
/// the sequential path stays exact while the parallel path gets hogwild-style
/// lock-free updates.
struct ParamStore {
    data: Vec<AtomicU32>,
}

impl ParamStore {
    fn new(init: Vec<f32>) -> Self {
        ParamStore { data: init.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect() }
    }

    #[inline]
    fn load(&self, idx: usize, out: &mut [f32]) {
        let src = &self.data[idx..idx + out.len()];
        for (o, a) in out.iter_mut().zip(src) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn add(&self, idx: usize, delta: &[f32]) {
        for (d, a) in delta.iter().zip(&self.data[idx..idx + delta.len()]) {
            let cur = f32::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + d).to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f32> {
        self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

/// Train skip-gram with negative sampling over the walk corpus and return the
/// input (center) vectors.
pub fn train_sgns(corpus: &WalkCorpus, cfg: &WalkConfig, exec: Execution) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if corpus.walks.is_empty() {
        return Err(Error::InvalidArgument("walk corpus is empty".into()));
    }
    let n = corpus.node_count;
    let dim = cfg.dim;

    let mut counts = vec![0usize; n];
    for walk in &corpus.walks {
        for &node in walk {
            counts[node] += 1;
        }
    }
    let table = NegativeTable::build(&counts);

    // Input vectors uniform in [-0.5/d, 0.5/d]; context vectors zero.
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_INIT]));
    let half = 0.5 / dim as f32;
    let input_init: Vec<f32> = (0..n * dim).map(|_| init_rng.gen_range(-half..half)).collect();
    let input = ParamStore::new(input_init);
    let ctx = ParamStore::new(vec![0.0; n * dim]);

    let total_tokens = (corpus.token_count() * cfg.epochs).max(1);
    let progress = AtomicUsize::new(0);

    let trainer = WalkTrainer {
        corpus,
        cfg,
        table: &table,
        input: &input,
        ctx: &ctx,
        progress: &progress,
        total_tokens,
    };

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..corpus.walks.len()).collect();
        let mut order_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_TRAIN, epoch as u64]));
        order.shuffle(&mut order_rng);

        #[cfg(feature = "parallel")]
        if exec.is_parallel() {
            use rayon::prelude::*;
            let threads = rayon::current_num_threads().max(1);
            let chunk = order.len().div_ceil(threads);
            order.par_chunks(chunk.max(1)).for_each(|chunk| {
                for &walk_idx in chunk {
                    trainer.train_walk(epoch, walk_idx);
                }
            });
            continue;
        }
        for &walk_idx in &order {
            trainer.train_walk(epoch, walk_idx);
        }
    }

    // Isolated nodes keep their random init; trained rows have moved off it.
    EmbeddingMatrix::from_rows(dim, input.into_vec(), (0..n).map(|i| i.to_string()).collect())
}

struct WalkTrainer<'a> {
    corpus: &'a WalkCorpus,
    cfg: &'a WalkConfig,
    table: &'a NegativeTable,
    input: &'a ParamStore,
    ctx: &'a ParamStore,
    progress: &'a AtomicUsize,
    total_tokens: usize,
}

impl WalkTrainer<'_> {
    fn train_walk(&self, epoch: usize, walk_idx: usize) {
        let walk = &self.corpus.walks[walk_idx];
        let dim = self.cfg.dim;
        let window = self.cfg.window;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.cfg.seed,
            &[STREAM_TRAIN, epoch as u64, walk_idx as u64, 1],
        ));
        let done = self.progress.fetch_add(walk.len(), Ordering::Relaxed);
        let lr = (self.cfg.initial_lr
            * (1.0 - done as f32 / self.total_tokens as f32))
            .max(MIN_LR);

        let mut z = vec![0.0f32; dim];
        let mut e = vec![0.0f32; dim];
        let mut c = vec![0.0f32; dim];
        for (i, &center) in walk.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let context = walk[j];
                self.input.load(center * dim, &mut z);
                e.iter_mut().for_each(|x| *x = 0.0);

                // Positive pair plus sampled negatives.
                for neg in 0..=self.cfg.negatives {
                    let (target_node, label) = if neg == 0 {
                        (context, 1.0f32)
                    } else {
                        let cand = self.table.sample(&mut rng);
                        if cand == context {
                            continue;
                        }
                        (cand, 0.0f32)
                    };
                    self.ctx.load(target_node * dim, &mut c);
                    let score: f32 = z.iter().zip(&c).map(|(a, b)| a * b).sum();
                    let g = (label - sigmoid(score)) * lr;
                    for (ev, cv) in e.iter_mut().zip(&c) {
                        *ev += g * cv;
                    }
                    // Reuse c as the context-row delta: ctx[target] += g * z.
                    for (cv, zv) in c.iter_mut().zip(&z) {
                        *cv = g * zv;
                    }
                    self.ctx.add(target_node * dim, &c);
                }
                self.input.add(center * dim, &e);
            }
        }
    }
}
