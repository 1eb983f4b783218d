use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use log::{info, warn};
use serde_json::{json, Map, Value};
use streetvae::corpus::train_val_split;
use streetvae::graph::normalize_adjacency;
use streetvae::nodemodel::{train_node_model, NodeModel};
use streetvae::tensor::save_checkpoint;
use streetvae::vgae::{train_vgae as fit_vgae, GraphSample, LossWeights, Vgae};

use super::{cell, csv_text, load_node_model, Ctx, UsageError};
use crate::pipeline::Corpus;

pub const NODES_CKPT: &str = "nodes.ckpt";
pub const VGAE_CKPT: &str = "vgae.ckpt";

#[derive(Debug, Args)]
pub struct TrainNodesArgs {
    /// Directory written by `preprocess`.
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainVgaeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Trained node model; it supplies the node features.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
}

struct Split {
    train: Vec<usize>,
    val: Vec<usize>,
}

impl Split {
    fn of(corpus: &Corpus, ctx: &Ctx) -> Self {
        let (train, val) = train_val_split(corpus.len(), ctx.cfg.train_fraction, ctx.cfg.seed);
        info!("split: {} training, {} held-out graphs", train.len(), val.len());
        Self { train, val }
    }

    fn meta(&self, corpus: &Corpus, seed: u64) -> Map<String, Value> {
        let ids = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| corpus.manifest.graphs[i].id.clone()).collect() };
        let mut meta = Map::new();
        meta.insert("seed".into(), json!(seed));
        meta.insert("train_ids".into(), json!(ids(&self.train)));
        meta.insert("val_ids".into(), json!(ids(&self.val)));
        meta
    }
}

pub fn train_nodes(ctx: &Ctx, args: &TrainNodesArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let split = Split::of(&corpus, ctx);
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus.tokens[i].clone()).collect::<Vec<_>>();
    let (train, val) = (pick(&split.train), pick(&split.val));

    let mut model = NodeModel::new(ctx.cfg.node_model(), ctx.cfg.seed)?;
    let report = train_node_model(&mut model, &train, &val, &ctx.cfg.node_training(), |e, _| {
        info!(
            "node model epoch {}: train nll {:.5}, held-out nll {}",
            e.epoch,
            e.train_nll,
            e.val_nll.map_or("-".into(), |v| format!("{v:.5}"))
        );
        Ok(())
    })
    .context("node model training failed")?;

    let curve = csv_text(
        &["epoch", "train_nll", "val_nll", "steps"],
        report
            .epochs
            .iter()
            .map(|e| [e.epoch.to_string(), e.train_nll.to_string(), cell(e.val_nll), e.steps.to_string()]),
    )?;
    ctx.write("nodes_curve.csv", curve)?;
    ctx.write_config()?;
    std::fs::create_dir_all(&ctx.out)?;
    save_checkpoint(&ctx.path(NODES_CKPT), &model.to_checkpoint(split.meta(&corpus, ctx.cfg.seed)))?;
    info!("wrote {}", ctx.path(NODES_CKPT).display());
    Ok(())
}

/// Adjacency plus node-model features for graph `i`.
pub(crate) fn graph_sample(corpus: &Corpus, node: &NodeModel, i: usize) -> Result<GraphSample> {
    let g = corpus.graph(i)?;
    let features = node
        .node_embeddings(&corpus.tokens[i])
        .with_context(|| format!("features of {}", corpus.manifest.graphs[i].id))?;
    Ok(GraphSample {
        adjacency: normalize_adjacency(&g),
        features,
    })
}

pub fn train_vgae(ctx: &Ctx, args: &TrainVgaeArgs) -> Result<()> {
    let Some(nodes_path) = &args.nodes else {
        return Err(UsageError("`train vgae` needs --nodes <checkpoint> from `train nodes`".into()).into());
    };
    let corpus = Corpus::load(&args.corpus)?;
    let node = load_node_model(nodes_path)?;
    let cfg = ctx.cfg.vgae_model();
    if node.config.d_model != cfg.in_dim {
        return Err(UsageError(format!(
            "node model width {} differs from feature_dim {}",
            node.config.d_model, cfg.in_dim
        ))
        .into());
    }
    let split = Split::of(&corpus, ctx);
    let samples = |idx: &[usize]| -> Result<Vec<GraphSample>> {
        let mut out = Vec::new();
        for &i in idx {
            let s = graph_sample(&corpus, &node, i)?;
            match LossWeights::for_adjacency(&s.adjacency.a) {
                Ok(_) => out.push(s),
                Err(e) => warn!("skipping {}: {e}", corpus.manifest.graphs[i].id),
            }
        }
        Ok(out)
    };
    let (train, val) = (samples(&split.train)?, samples(&split.val)?);

    let mut model = Vgae::new(cfg, ctx.cfg.seed)?;
    let report = fit_vgae(&mut model, &train, &val, &ctx.cfg.vgae_training(), |e, _| {
        info!(
            "VGAE epoch {}: loss {:.5}, held-out AUC {}",
            e.epoch,
            e.train_loss,
            e.val_auc.map_or("-".into(), |v| format!("{v:.4}"))
        );
        Ok(())
    })
    .context("VGAE training failed")?;

    let curve = csv_text(
        &["epoch", "train_loss", "val_auc"],
        report
            .epochs
            .iter()
            .map(|e| [e.epoch.to_string(), e.train_loss.to_string(), cell(e.val_auc)]),
    )?;
    ctx.write("vgae_curve.csv", curve)?;
    ctx.write_config()?;

    let mut diagonals: Vec<f64> = split.train.iter().map(|&i| corpus.manifest.graphs[i].diagonal_m).collect();
    diagonals.sort_by(f64::total_cmp);
    let mid = diagonals.len() / 2;
    let scale_m = if diagonals.len() % 2 == 1 {
        diagonals[mid]
    } else {
        0.5 * (diagonals[mid - 1] + diagonals[mid])
    };
    let mut meta = split.meta(&corpus, ctx.cfg.seed);
    meta.insert("scale_m".into(), json!(scale_m));
    meta.insert("n_cap".into(), json!(ctx.cfg.n_cap));
    save_checkpoint(&ctx.path(VGAE_CKPT), &model.to_checkpoint(meta))?;
    info!("wrote {}", ctx.path(VGAE_CKPT).display());
    Ok(())
}
