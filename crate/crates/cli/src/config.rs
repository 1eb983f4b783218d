//! Flat `key = value` pipeline configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys and values
//! outside their documented range are rejected when the file is loaded.
//! Every key doubles as a `--kebab-case` command-line flag, and flags win.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use streetvae::analysis::{DEFAULT_EMBED_DIM, DEFAULT_K, DEFAULT_MAX_ITER, DEFAULT_NODE_CAP};
use streetvae::corpus::TRAIN_FRACTION;
use streetvae::graph::DEFAULT_MERGE_THRESHOLD_M;
use streetvae::ingest::{DEFAULT_HALF_WIDTH_M, DEFAULT_MIN_POPULATION};
use streetvae::nodemodel::{NodeFeatureMode, NodeModelConfig, NodeTrainConfig, FEATURE_DIM};
use streetvae::vgae::{GenerateConfig, VgaeConfig, VgaeTrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub jobs: usize,
    // Data processing.
    pub half_width_m: f64,
    pub merge_threshold_m: f64,
    pub min_population: u64,
    pub n_cap: usize,
    pub train_fraction: f64,
    // Node model.
    pub feature_dim: usize,
    pub node_layers: usize,
    pub node_heads: usize,
    pub node_ff: usize,
    pub node_dropout: f64,
    pub feature_mode: NodeFeatureMode,
    pub node_epochs: usize,
    pub node_batch: usize,
    pub node_lr: f64,
    // Graph autoencoder.
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub vgae_epochs: usize,
    pub vgae_lr: f64,
    pub identity_adjacency_prob: f64,
    // Generation.
    pub count: usize,
    pub temperature: f64,
    pub tau: f64,
    pub bernoulli: bool,
    // Analysis.
    pub embed_dim: usize,
    pub k: usize,
    pub elbow_k_min: usize,
    pub elbow_k_max: usize,
    pub kmeans_max_iter: usize,
    pub exclude_boundary_blocks: bool,
    pub orientation_weighted: bool,
    // Fetch.
    pub fetch_timeout_s: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let node = NodeModelConfig::default();
        let node_train = NodeTrainConfig::default();
        let vgae = VgaeConfig::default();
        let vgae_train = VgaeTrainConfig::default();
        let generate = GenerateConfig::default();
        Self {
            seed: 0,
            jobs: 1,
            half_width_m: DEFAULT_HALF_WIDTH_M,
            merge_threshold_m: DEFAULT_MERGE_THRESHOLD_M,
            min_population: DEFAULT_MIN_POPULATION,
            n_cap: DEFAULT_NODE_CAP,
            train_fraction: TRAIN_FRACTION,
            feature_dim: FEATURE_DIM,
            node_layers: node.layers,
            node_heads: node.heads,
            node_ff: node.d_ff,
            node_dropout: node.dropout,
            feature_mode: node.feature_mode,
            node_epochs: node_train.epochs,
            node_batch: node_train.batch_size,
            node_lr: node_train.learning_rate,
            hidden_dim: vgae.hidden,
            latent_dim: vgae.latent,
            vgae_epochs: vgae_train.epochs,
            vgae_lr: vgae_train.learning_rate,
            identity_adjacency_prob: vgae_train.identity_adjacency_prob,
            count: 100,
            temperature: generate.temperature,
            tau: generate.tau,
            bernoulli: generate.bernoulli,
            embed_dim: DEFAULT_EMBED_DIM,
            k: DEFAULT_K,
            elbow_k_min: 2,
            elbow_k_max: 12,
            kmeans_max_iter: DEFAULT_MAX_ITER,
            exclude_boundary_blocks: false,
            orientation_weighted: true,
            fetch_timeout_s: 60,
        }
    }
}

/// Every recognised key with a one-line description (used for flags).
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master random seed"),
    ("jobs", "worker threads for per-graph work (>= 1)"),
    ("half_width_m", "half side of the square study box in meters (> 0)"),
    ("merge_threshold_m", "intersection merge distance in meters (>= 0)"),
    ("min_population", "keep places with population above this"),
    ("n_cap", "maximum nodes per graph (>= 2)"),
    ("train_fraction", "share of graphs used for training, in (0, 1)"),
    ("feature_dim", "node model width = per-node feature width"),
    ("node_layers", "transformer blocks"),
    ("node_heads", "attention heads (must divide feature_dim)"),
    ("node_ff", "feed-forward width"),
    ("node_dropout", "dropout probability in [0, 1)"),
    ("feature_mode", "node feature readout: mean, y_token or concat_halves"),
    ("node_epochs", "node model epochs"),
    ("node_batch", "node model minibatch size"),
    ("node_lr", "node model learning rate (> 0)"),
    ("hidden_dim", "GCN hidden width"),
    ("latent_dim", "latent width F"),
    ("vgae_epochs", "autoencoder epochs"),
    ("vgae_lr", "autoencoder learning rate (> 0)"),
    ("identity_adjacency_prob", "chance of encoding a training graph with self-loops only, in [0, 1]"),
    ("count", "number of generated samples"),
    ("temperature", "node sampling temperature (>= 0; 0 is greedy)"),
    ("tau", "edge probability threshold in [0, 1]"),
    ("bernoulli", "draw edges at random instead of thresholding (true/false)"),
    ("embed_dim", "PCA width of graph embeddings"),
    ("k", "number of clusters"),
    ("elbow_k_min", "smallest k on the elbow curve"),
    ("elbow_k_max", "largest k on the elbow curve"),
    ("kmeans_max_iter", "Lloyd iteration cap"),
    ("exclude_boundary_blocks", "drop blocks touching the outer face (true/false)"),
    ("orientation_weighted", "weight bearings by street length (true/false)"),
    ("fetch_timeout_s", "Overpass request timeout in seconds (> 0)"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("config key `{key}`: cannot parse `{value}`: {e}"))
}

impl PipelineConfig {
    /// Parses config text on top of the defaults and validates the result.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`, got `{raw}`", no + 1);
            };
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("config line {}", no + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "half_width_m" => self.half_width_m = parse(key, value)?,
            "merge_threshold_m" => self.merge_threshold_m = parse(key, value)?,
            "min_population" => self.min_population = parse(key, value)?,
            "n_cap" => self.n_cap = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "feature_dim" => self.feature_dim = parse(key, value)?,
            "node_layers" => self.node_layers = parse(key, value)?,
            "node_heads" => self.node_heads = parse(key, value)?,
            "node_ff" => self.node_ff = parse(key, value)?,
            "node_dropout" => self.node_dropout = parse(key, value)?,
            "feature_mode" => self.feature_mode = parse(key, value)?,
            "node_epochs" => self.node_epochs = parse(key, value)?,
            "node_batch" => self.node_batch = parse(key, value)?,
            "node_lr" => self.node_lr = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "latent_dim" => self.latent_dim = parse(key, value)?,
            "vgae_epochs" => self.vgae_epochs = parse(key, value)?,
            "vgae_lr" => self.vgae_lr = parse(key, value)?,
            "identity_adjacency_prob" => self.identity_adjacency_prob = parse(key, value)?,
            "count" => self.count = parse(key, value)?,
            "temperature" => self.temperature = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "bernoulli" => self.bernoulli = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "elbow_k_min" => self.elbow_k_min = parse(key, value)?,
            "elbow_k_max" => self.elbow_k_max = parse(key, value)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse(key, value)?,
            "exclude_boundary_blocks" => self.exclude_boundary_blocks = parse(key, value)?,
            "orientation_weighted" => self.orientation_weighted = parse(key, value)?,
            "fetch_timeout_s" => self.fetch_timeout_s = parse(key, value)?,
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_string());
            }
        };
        check(self.jobs >= 1, "jobs must be >= 1");
        check(self.half_width_m > 0.0 && self.half_width_m.is_finite(), "half_width_m must be > 0");
        check(self.merge_threshold_m >= 0.0 && self.merge_threshold_m.is_finite(), "merge_threshold_m must be >= 0");
        check(self.n_cap >= 2, "n_cap must be >= 2");
        check(self.train_fraction > 0.0 && self.train_fraction < 1.0, "train_fraction must lie in (0, 1)");
        check(self.feature_dim >= 1 && self.node_layers >= 1 && self.node_ff >= 1, "node model sizes must be >= 1");
        check(
            self.node_heads >= 1 && self.feature_dim % self.node_heads == 0,
            "node_heads must divide feature_dim",
        );
        check((0.0..1.0).contains(&self.node_dropout), "node_dropout must lie in [0, 1)");
        check(self.node_batch >= 1, "node_batch must be >= 1");
        check(self.node_lr > 0.0 && self.vgae_lr > 0.0, "learning rates must be > 0");
        check(self.hidden_dim >= 1 && self.latent_dim >= 1, "VGAE widths must be >= 1");
        check(
            (0.0..=1.0).contains(&self.identity_adjacency_prob),
            "identity_adjacency_prob must lie in [0, 1]",
        );
        check(self.temperature >= 0.0 && self.temperature.is_finite(), "temperature must be >= 0");
        check((0.0..=1.0).contains(&self.tau), "tau must lie in [0, 1]");
        check(self.embed_dim >= 1, "embed_dim must be >= 1");
        check(self.k >= 1, "k must be >= 1");
        check(
            self.elbow_k_min >= 1 && self.elbow_k_min <= self.elbow_k_max,
            "elbow range must satisfy 1 <= elbow_k_min <= elbow_k_max",
        );
        check(self.kmeans_max_iter >= 1, "kmeans_max_iter must be >= 1");
        check(self.fetch_timeout_s >= 1, "fetch_timeout_s must be >= 1");
        if problems.is_empty() {
            Ok(())
        } else {
            bail!("invalid configuration: {}", problems.join("; "))
        }
    }

    pub fn node_model(&self) -> NodeModelConfig {
        NodeModelConfig {
            d_model: self.feature_dim,
            layers: self.node_layers,
            heads: self.node_heads,
            d_ff: self.node_ff,
            max_nodes: self.n_cap,
            dropout: self.node_dropout,
            feature_mode: self.feature_mode,
        }
    }

    pub fn node_training(&self) -> NodeTrainConfig {
        NodeTrainConfig {
            epochs: self.node_epochs,
            batch_size: self.node_batch,
            learning_rate: self.node_lr,
            seed: self.seed,
            max_steps: None,
            stop_below: None,
        }
    }

    pub fn vgae_model(&self) -> VgaeConfig {
        VgaeConfig {
            in_dim: self.feature_dim,
            hidden: self.hidden_dim,
            latent: self.latent_dim,
        }
    }

    pub fn vgae_training(&self) -> VgaeTrainConfig {
        VgaeTrainConfig {
            epochs: self.vgae_epochs,
            learning_rate: self.vgae_lr,
            seed: self.seed,
            stop_at_auc: None,
            identity_adjacency_prob: self.identity_adjacency_prob,
        }
    }

    /// The effective configuration in the file format.
    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for (key, _) in KEYS {
            let v = &value[*key];
            let shown = v.as_str().map_or_else(|| v.to_string(), str::to_string);
            let _ = writeln!(out, "{key} = {shown}");
        }
        out
    }
}

/// One pipeline constant checked against its reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantCheck {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
    pub ok: bool,
}

/// Checks the defaults the data pipeline and models are built around:
/// 10 m merging, a 1 km box, population above 1,000, an 80/20 split,
/// N x 128 node features and k = 7 clusters.
pub fn self_test(cfg: &PipelineConfig) -> Vec<ConstantCheck> {
    let mut checks = Vec::new();
    let mut add = |name, expected: String, actual: String| {
        let ok = expected == actual;
        checks.push(ConstantCheck {
            name,
            expected,
            actual,
            ok,
        });
    };
    add("merge_threshold_m", "10".into(), format!("{}", cfg.merge_threshold_m));
    add("box_side_m", "1000".into(), format!("{}", 2.0 * cfg.half_width_m));
    add("min_population", "1000".into(), cfg.min_population.to_string());
    add("train_fraction", "0.8".into(), format!("{}", cfg.train_fraction));
    add("feature_dim", "128".into(), cfg.feature_dim.to_string());
    add("vgae_in_dim", "128".into(), cfg.vgae_model().in_dim.to_string());
    add("k", "7".into(), cfg.k.to_string());
    checks
}
