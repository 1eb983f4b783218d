use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use streetvae::analysis::{block_metrics, orientation_histogram, topo_metrics, BlockOptions, BlockRow};
use streetvae::graph::{read_graph_file, StreetGraph};

use super::{cell, csv_text, Ctx};
use crate::config::PipelineConfig;
use crate::pipeline::Corpus;

/// The three topological and three geometric per-graph metrics.
pub const METRIC_NAMES: [&str; 6] = [
    "avg_street_length",
    "avg_streets_per_node",
    "avg_circuity",
    "avg_block_area",
    "avg_form_factor",
    "avg_compactness",
];

/// Metrics of one graph; block values are absent when the graph has no
/// block (no bounded face, or edges that cross).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphRow {
    pub id: String,
    pub nodes: usize,
    pub edges: usize,
    pub values: [Option<f64>; 6],
    pub orientation_entropy: Option<f64>,
    pub orientation: Vec<f64>,
    #[serde(skip)]
    pub blocks: Vec<BlockRow>,
}

pub fn graph_row(id: &str, g: &StreetGraph, cfg: &PipelineConfig) -> GraphRow {
    let mut values = [None; 6];
    match topo_metrics(g) {
        Ok(m) => {
            values[0] = Some(m.avg_street_length);
            values[1] = Some(m.avg_streets_per_node);
            values[2] = Some(m.avg_circuity);
        }
        Err(e) => warn!("{id}: {e}"),
    }
    let mut blocks = Vec::new();
    match block_metrics(
        g,
        BlockOptions {
            exclude_boundary: cfg.exclude_boundary_blocks,
        },
    ) {
        Ok(report) => {
            if let Some(s) = report.summary {
                values[3] = Some(s.avg_area);
                values[4] = Some(s.avg_form_factor);
                values[5] = Some(s.avg_compactness);
            }
            blocks = report.blocks;
        }
        Err(e) => log::debug!("{id}: no block metrics: {e}"),
    }
    let (orientation_entropy, orientation) = match orientation_histogram(g, cfg.orientation_weighted) {
        Ok(h) => (Some(h.entropy), h.bins),
        Err(_) => (None, Vec::new()),
    };
    GraphRow {
        id: id.to_string(),
        nodes: g.num_nodes(),
        edges: g.num_edges(),
        values,
        orientation_entropy,
        orientation,
        blocks,
    }
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// A corpus directory, or a directory of graph JSON files.
    #[arg(long)]
    pub graphs: PathBuf,
}

pub(crate) fn metrics_csv(rows: &[GraphRow]) -> Result<String> {
    let mut header = vec!["id", "nodes", "edges"];
    header.extend(METRIC_NAMES);
    header.push("orientation_entropy");
    csv_text(
        &header,
        rows.iter().map(|r| {
            let mut out = vec![r.id.clone(), r.nodes.to_string(), r.edges.to_string()];
            out.extend(r.values.iter().map(|v| cell(*v)));
            out.push(cell(r.orientation_entropy));
            out
        }),
    )
}

/// Loads `(id, graph)` pairs from a corpus or a plain directory of graphs.
pub(crate) fn load_graph_dir(dir: &PathBuf) -> Result<Vec<(String, StreetGraph)>> {
    if dir.join(crate::pipeline::MANIFEST).exists() {
        let corpus = Corpus::load(dir)?;
        return (0..corpus.len())
            .map(|i| Ok((corpus.manifest.graphs[i].id.clone(), corpus.graph(i)?)))
            .collect();
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((id, read_graph_file(p)?))
        })
        .collect()
}

pub fn metrics(ctx: &Ctx, args: &MetricsArgs) -> Result<()> {
    let graphs = load_graph_dir(&args.graphs)?;
    if graphs.is_empty() {
        bail!("no graphs in {}", args.graphs.display());
    }
    let rows: Vec<GraphRow> = ctx
        .pool()?
        .install(|| graphs.par_iter().map(|(id, g)| graph_row(id, g, &ctx.cfg)).collect());

    let blocks = csv_text(
        &["id", "face", "area", "perimeter", "form_factor", "compactness", "touches_boundary"],
        rows.iter().flat_map(|r| {
            r.blocks.iter().map(move |b| {
                [
                    r.id.clone(),
                    b.face.to_string(),
                    b.area.to_string(),
                    b.perimeter.to_string(),
                    b.form_factor.to_string(),
                    b.compactness.to_string(),
                    b.touches_boundary.to_string(),
                ]
            })
        }),
    )?;
    let mut header = vec!["id".to_string()];
    header.extend((0..streetvae::analysis::ORIENTATION_BINS).map(|b| format!("deg{}", b * 10)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let orientation = csv_text(
        &header,
        rows.iter().filter(|r| !r.orientation.is_empty()).map(|r| {
            let mut out = vec![r.id.clone()];
            out.extend(r.orientation.iter().map(f64::to_string));
            out
        }),
    )?;
    ctx.write("metrics.csv", metrics_csv(&rows)?)?;
    ctx.write("blocks.csv", blocks)?;
    ctx.write("orientation.csv", orientation)?;
    ctx.write_config()?;
    info!("wrote metrics for {} graphs", rows.len());
    Ok(())
}
