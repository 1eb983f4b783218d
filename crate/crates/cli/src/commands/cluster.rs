use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use log::{info, warn};
use serde_json::json;
use streetvae::analysis::{cluster_summaries, elbow_curve, kmeans, orientation_histogram};
use streetvae::ingest::PlaceRecord;
use streetvae::tensor::Tensor;

use super::{csv_text, Ctx};
use crate::pipeline::Corpus;
use crate::svg;

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// `embeddings.csv` written by `embed`.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// `places.json` from the corpus.
    #[arg(long)]
    pub places: PathBuf,
    /// Corpus for per-cluster orientation roses (optional).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

fn read_embeddings(path: &PathBuf) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut fields = record.iter();
        ids.push(fields.next().unwrap_or_default().to_string());
        let row = fields
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 2))?;
        rows.push(row);
    }
    Ok((ids, rows))
}

pub fn cluster(ctx: &Ctx, args: &ClusterArgs) -> Result<()> {
    let (ids, rows) = read_embeddings(&args.embeddings)?;
    let places: Vec<PlaceRecord> = serde_json::from_str(
        &std::fs::read_to_string(&args.places).with_context(|| format!("reading {}", args.places.display()))?,
    )?;
    if rows.is_empty() {
        bail!("{} holds no embeddings", args.embeddings.display());
    }
    let data = Tensor::from_rows(&rows)?;
    let cfg = &ctx.cfg;
    if cfg.k > rows.len() {
        bail!("k = {} exceeds the {} embeddings", cfg.k, rows.len());
    }
    let result = kmeans(&data, cfg.k, cfg.seed, cfg.kmeans_max_iter)?;
    // Fails with the orphan ids when the join is incomplete.
    let summary = cluster_summaries(&result, &ids, &places)?;

    let k_max = cfg.elbow_k_max.min(rows.len());
    let ks: Vec<usize> = (cfg.elbow_k_min..=k_max).collect();
    if ks.len() < (cfg.elbow_k_min..=cfg.elbow_k_max).count() {
        warn!("elbow range truncated to k <= {k_max} by the number of embeddings");
    }
    let elbow = if ks.is_empty() { None } else { Some(elbow_curve(&data, &ks, cfg.seed)?) };

    ctx.write(
        "assignments.csv",
        csv_text(
            &["id", "cluster"],
            ids.iter().zip(&result.assignments).map(|(id, l)| [id.clone(), l.to_string()]),
        )?,
    )?;
    ctx.write(
        "cluster_histogram.csv",
        csv_text(
            &["cluster", "count"],
            summary.histogram.iter().enumerate().map(|(c, n)| [c.to_string(), n.to_string()]),
        )?,
    )?;
    let mut header = vec!["country".to_string(), "mode".into(), "tied".into(), "variety".into()];
    header.extend((0..cfg.k).map(|c| format!("n{c}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.write(
        "countries.csv",
        csv_text(
            &header,
            summary.countries.iter().map(|c| {
                let mut out = vec![c.country.clone(), c.mode.to_string(), c.tied.to_string(), c.variety.to_string()];
                out.extend(c.counts.iter().map(usize::to_string));
                out
            }),
        )?,
    )?;
    let labels: Vec<String> = (0..cfg.k).map(|c| c.to_string()).collect();
    ctx.write(
        "cluster_histogram.svg",
        svg::bar_chart(
            "Cluster membership",
            &labels,
            &[("", summary.histogram.iter().map(|&n| n as f64).collect())],
        ),
    )?;
    if let Some(elbow) = &elbow {
        ctx.write(
            "elbow.csv",
            csv_text(
                &["k", "inertia"],
                elbow.points.iter().map(|(k, i)| [k.to_string(), i.to_string()]),
            )?,
        )?;
        let pts: Vec<(f64, f64)> = elbow.points.iter().map(|&(k, i)| (k as f64, i)).collect();
        ctx.write("elbow.svg", svg::line_chart("Inertia against k", &pts))?;
    }

    if let Some(dir) = &args.corpus {
        write_roses(ctx, &Corpus::load(dir)?, &ids, &result.assignments)?;
    }
    ctx.write_json(
        "cluster_report.json",
        &json!({
            "k": cfg.k,
            "inertia": result.inertia,
            "iterations": result.iterations,
            "suggested_k": elbow.as_ref().map(|e| e.suggested_k),
            "histogram": summary.histogram,
        }),
    )?;
    ctx.write_config()?;
    info!("clustered {} embeddings into {} groups", rows.len(), cfg.k);
    Ok(())
}

/// Orientation rose of the first member (in file order) of every cluster.
fn write_roses(ctx: &Ctx, corpus: &Corpus, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut table = Vec::new();
    for c in 0..ctx.cfg.k {
        let Some(id) = ids.iter().zip(labels).find(|(_, &l)| l == c).map(|(id, _)| id) else {
            continue;
        };
        let Some(i) = corpus.index_of(id) else {
            warn!("{id} is not in the corpus; no rose for cluster {c}");
            continue;
        };
        let h = orientation_histogram(&corpus.graph(i)?, ctx.cfg.orientation_weighted)?;
        ctx.write(
            &format!("roses/cluster_{c}.svg"),
            svg::rose(&format!("Cluster {c}: {id}"), &h.bins),
        )?;
        let mut row = vec![c.to_string(), id.clone(), h.entropy.to_string()];
        row.extend(h.bins.iter().map(f64::to_string));
        table.push(row);
    }
    let mut header = vec!["cluster".to_string(), "id".into(), "entropy".into()];
    header.extend((0..streetvae::analysis::ORIENTATION_BINS).map(|b| format!("deg{}", b * 10)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.write("cluster_orientation.csv", csv_text(&header, table)?)?;
    Ok(())
}
