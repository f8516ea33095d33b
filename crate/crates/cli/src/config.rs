//! Config file support: TOML (or JSON) sections for each pipeline stage.
//! Precedence is CLI flag > config file > built-in default.

use anyhow::{Context, Result};
use galign_core::adversarial::{AdvConfig, MapInit};
use galign_core::embedding::WalkConfig;
use galign_core::refinement::{RefineConfig, Retrieval};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub embed: EmbedSection,
    #[serde(default)]
    pub adversarial: AdvSection,
    #[serde(default)]
    pub refine: RefineSection,
    #[serde(default)]
    pub incremental: IncrSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSection {
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub walks_per_node: Option<usize>,
    pub walk_length: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f32>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvSection {
    pub lr: Option<f64>,
    pub lr_decay: Option<f64>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub disc_steps_per_map_step: Option<usize>,
    pub beta: Option<f64>,
    pub hidden: Option<usize>,
    pub leaky_slope: Option<f64>,
    pub input_dropout: Option<f64>,
    pub smoothing: Option<f64>,
    pub init: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSection {
    pub k: Option<usize>,
    pub threshold: Option<f64>,
    pub no_threshold: Option<bool>,
    pub retrieval: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncrSection {
    pub outer_max: Option<usize>,
    pub stop_tol: Option<f64>,
    pub precision_ns: Option<Vec<usize>>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("bad JSON config {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("bad TOML config {}", path.display()))
    }
}

pub fn parse_map_init(s: &str) -> Result<MapInit> {
    match s.to_ascii_lowercase().as_str() {
        "identity" => Ok(MapInit::Identity),
        "spectral" => Ok(MapInit::Spectral),
        other => anyhow::bail!("unknown map init `{other}` (expected identity|spectral)"),
    }
}

pub fn parse_retrieval(s: &str) -> Result<Retrieval> {
    match s.to_ascii_lowercase().as_str() {
        "nn" => Ok(Retrieval::Nn),
        "cgss" => Ok(Retrieval::Cgss),
        other => anyhow::bail!("unknown retrieval `{other}` (expected nn|cgss)"),
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flags shared by every embedding-bearing subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct EmbedFlags {
    /// Embedding dimension d (method default 32)
    #[arg(long)]
    pub dim: Option<usize>,
    /// Skip-gram window size w (method default 5)
    #[arg(long)]
    pub window: Option<usize>,
    /// Random walks started per node (default 10)
    #[arg(long)]
    pub walks: Option<usize>,
    /// Nodes per walk (default 40)
    #[arg(long)]
    pub walk_length: Option<usize>,
    /// Negative samples per positive pair (default 5)
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Skip-gram epochs over the walk corpus (default 5)
    #[arg(long)]
    pub embed_epochs: Option<usize>,
    /// Initial skip-gram learning rate (default 0.025, linear decay to 1e-4)
    #[arg(long)]
    pub embed_lr: Option<f32>,
}

impl EmbedFlags {
    pub fn build(&self, file: &EmbedSection, seed: u64) -> WalkConfig {
        let d = WalkConfig::default();
        WalkConfig {
            walks_per_node: pick(self.walks, file.walks_per_node, d.walks_per_node),
            walk_length: pick(self.walk_length, file.walk_length, d.walk_length),
            window: pick(self.window, file.window, d.window),
            dim: pick(self.dim, file.dim, d.dim),
            negatives: pick(self.negatives, file.negatives, d.negatives),
            epochs: pick(self.embed_epochs, file.epochs, d.epochs),
            initial_lr: pick(self.embed_lr, file.lr, d.initial_lr),
            seed,
        }
    }
}

/// Adversarial-phase flags.
#[derive(Debug, Clone, clap::Args)]
pub struct AdvFlags {
    /// Adversarial epochs over shuffled batches (default 50)
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Batch size (paper default 1000, clamped to the node count)
    #[arg(long)]
    pub batch: Option<usize>,
    /// SGD learning rate for both players (paper default 1e-3)
    #[arg(long)]
    pub lr: Option<f64>,
    /// Learning-rate decay applied once per epoch (paper default 0.95)
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// Discriminator steps per mapping step (default 1)
    #[arg(long)]
    pub disc_steps: Option<usize>,
    /// Orthogonality pull-back strength beta (default 0.01)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Discriminator hidden width (paper default 2048)
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Leaky-rectifier negative slope (default 0.2)
    #[arg(long)]
    pub leaky_slope: Option<f64>,
    /// Dropout rate on discriminator inputs (paper default 0.1)
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Label smoothing s in the discriminator targets (paper default 0.2)
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Mapping initialization: identity | spectral (default identity)
    #[arg(long)]
    pub map_init: Option<String>,
}

impl AdvFlags {
    pub fn build(&self, file: &AdvSection, seed: u64) -> Result<AdvConfig> {
        let d = AdvConfig::default();
        let init_name = self.map_init.clone().or_else(|| file.init.clone());
        let init = match init_name {
            Some(s) => parse_map_init(&s)?,
            None => d.init,
        };
        Ok(AdvConfig {
            lr: pick(self.lr, file.lr, d.lr),
            lr_decay: pick(self.lr_decay, file.lr_decay, d.lr_decay),
            batch: pick(self.batch, file.batch, d.batch),
            epochs: pick(self.epochs, file.epochs, d.epochs),
            disc_steps_per_map_step: pick(
                self.disc_steps,
                file.disc_steps_per_map_step,
                d.disc_steps_per_map_step,
            ),
            beta: pick(self.beta, file.beta, d.beta),
            seed,
            hidden: pick(self.hidden, file.hidden, d.hidden),
            leaky_slope: pick(self.leaky_slope, file.leaky_slope, d.leaky_slope),
            input_dropout: pick(self.dropout, file.input_dropout, d.input_dropout),
            smoothing: pick(self.smoothing, file.smoothing, d.smoothing),
            init,
        })
    }
}

/// Refinement flags.
#[derive(Debug, Clone, clap::Args)]
pub struct RefineFlags {
    /// CGSS neighborhood size K (paper default 10)
    #[arg(long)]
    pub k: Option<usize>,
    /// Pseudo-anchor selection threshold on CGSS (paper default 0.7)
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Disable the threshold: keep every mutual nearest neighbor
    #[arg(long, default_value_t = false)]
    pub no_threshold: bool,
}

impl RefineFlags {
    pub fn build(&self, file: &RefineSection) -> RefineConfig {
        let d = RefineConfig::default();
        let threshold = if self.no_threshold || file.no_threshold == Some(true) {
            None
        } else {
            Some(pick(self.threshold, file.threshold, d.threshold.unwrap()))
        };
        RefineConfig { k: pick(self.k, file.k, d.k), threshold }
    }
}

pub fn parse_ns(spec: &str) -> Result<Vec<usize>> {
    let ns: Vec<usize> = spec
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .context("bad N list (expected comma-separated integers)")?;
    anyhow::ensure!(!ns.is_empty() && ns.iter().all(|&n| n > 0), "Ns must be positive");
    Ok(ns)
}
