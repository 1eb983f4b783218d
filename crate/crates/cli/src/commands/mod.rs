//! Subcommand implementations. Each takes a [`Ctx`] and writes its
//! artifacts below `ctx.out`.

mod cluster;
mod embed;
mod fetch;
mod generate;
mod metrics;
mod plot;
mod preprocess;
mod train;

pub use cluster::{cluster, ClusterArgs};
pub use embed::{embed, EmbedArgs};
pub use fetch::{fetch, FetchArgs};
pub use generate::{generate, GenerateArgs};
pub use metrics::{graph_row, metrics, GraphRow, MetricsArgs, METRIC_NAMES};
pub use plot::{plot, PlotArgs};
pub use preprocess::{preprocess, PreprocessArgs};
pub use train::{train_nodes, train_vgae, TrainNodesArgs, TrainVgaeArgs};

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use streetvae::nodemodel::NodeModel;
use streetvae::tensor::load_checkpoint;
use streetvae::vgae::Vgae;

use crate::config::PipelineConfig;

/// A command-line misuse; `main` maps it to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: PipelineConfig, out: PathBuf) -> Self {
        Self { cfg, out }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json(&self, rel: &str, value: &impl Serialize) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Records the effective configuration next to the outputs.
    pub fn write_config(&self) -> Result<()> {
        self.write("config.txt", self.cfg.to_text())?;
        Ok(())
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.cfg.jobs).build()?)
    }
}

/// Builds CSV text from a header and rows of already formatted fields.
pub(crate) fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Formats an optional number; missing values are empty cells.
pub(crate) fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn load_node_model(path: &Path) -> Result<NodeModel> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading node checkpoint {}", path.display()))?;
    Ok(NodeModel::from_checkpoint(&ckpt)?)
}

pub(crate) fn load_vgae(path: &Path) -> Result<(Vgae, serde_json::Map<String, serde_json::Value>)> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading VGAE checkpoint {}", path.display()))?;
    Ok((Vgae::from_checkpoint(&ckpt)?, ckpt.meta))
}

/// Reads a string list stored in checkpoint metadata.
pub(crate) fn meta_ids(meta: &serde_json::Map<String, serde_json::Value>, key: &str) -> Option<Vec<String>> {
    meta.get(key)?
        .as_array()?
        .iter()
        .map(|v| v.as_str().map(str::to_string))
        .collect()
}

/// Equal-width histogram over `[lo, hi]`; returns bin edges and counts.
pub(crate) fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> (Vec<f64>, Vec<usize>) {
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values.iter().filter(|v| v.is_finite()) {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    (edges, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_every_finite_value() {
        let (edges, counts) = histogram(&[0.0, 0.5, 1.0, 2.0, f64::NAN], 0.0, 2.0, 4);
        assert_eq!(edges, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(counts, vec![1, 1, 1, 1]);
        let (_, flat) = histogram(&[3.0, 3.0], 3.0, 3.0, 2);
        assert_eq!(flat, vec![2, 0]);
    }
}
