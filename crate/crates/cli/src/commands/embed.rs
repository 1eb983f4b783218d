use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use log::{info, warn};
use rayon::prelude::*;
use streetvae::analysis::{flatten_padded, pca_fit};
use streetvae::tensor::Tensor;

use super::train::graph_sample;
use super::{csv_text, load_node_model, load_vgae, meta_ids, Ctx};
use crate::pipeline::Corpus;

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub vgae: PathBuf,
}

/// Posterior means, zero-padded to `n_cap` rows, flattened and reduced by
/// a PCA fitted on the training graphs.
pub fn embed(ctx: &Ctx, args: &EmbedArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let node = load_node_model(&args.nodes)?;
    let (vgae, meta) = load_vgae(&args.vgae)?;
    let n_cap = ctx.cfg.n_cap;

    let flat: Vec<Vec<f64>> = ctx.pool()?.install(|| {
        (0..corpus.len())
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let s = graph_sample(&corpus, &node, i)?;
                let (mu, _) = vgae.encode(&s.adjacency, &s.features)?;
                Ok(flatten_padded(&mu, n_cap)?)
            })
            .collect::<Result<_>>()
    })?;

    let train_ids = meta_ids(&meta, "train_ids").unwrap_or_else(|| corpus.ids());
    let fit_rows: Vec<Vec<f64>> = train_ids
        .iter()
        .filter_map(|id| corpus.index_of(id))
        .map(|i| flat[i].clone())
        .collect();
    if fit_rows.len() < 2 {
        bail!("PCA needs at least 2 training graphs present in the corpus, found {}", fit_rows.len());
    }
    let width = fit_rows[0].len();
    let d = ctx.cfg.embed_dim.min(fit_rows.len()).min(width);
    if d < ctx.cfg.embed_dim {
        warn!("embedding width reduced from {} to {d} (only {} training graphs)", ctx.cfg.embed_dim, fit_rows.len());
    }
    let pca = pca_fit(&Tensor::from_rows(&fit_rows)?, d)?;
    info!(
        "PCA keeps {:.1}% of the training variance in {d} dimensions",
        100.0 * pca.explained_variance.iter().sum::<f64>() / pca.total_variance.max(f64::MIN_POSITIVE)
    );

    let mut header = vec!["id".to_string()];
    header.extend((0..d).map(|j| format!("e{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = corpus
        .ids()
        .into_iter()
        .zip(&flat)
        .map(|(id, row)| -> Result<Vec<String>> {
            let mut out = vec![id];
            out.extend(pca.project(row)?.iter().map(f64::to_string));
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    ctx.write("embeddings.csv", csv_text(&header, rows)?)?;
    ctx.write_json("pca.json", &pca)?;
    ctx.write_config()?;
    info!("wrote {} embeddings", corpus.len());
    Ok(())
}
