use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use streetvae::analysis::ks_statistic;
use streetvae::graph::{write_graph_file, StreetGraph};
use streetvae::vgae::{generate_network, GenerateConfig};

use super::metrics::metrics_csv;
use super::{csv_text, graph_row, histogram, load_node_model, load_vgae, meta_ids, Ctx, GraphRow, METRIC_NAMES};
use crate::pipeline::Corpus;
use crate::svg;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub vgae: PathBuf,
    /// Corpus whose held-out graphs are the comparison set.
    #[arg(long)]
    pub corpus: PathBuf,
}

const HIST_BINS: usize = 20;
const CIRCUITY_SLACK: f64 = 1e-9;

#[derive(Debug, Serialize)]
struct Summary {
    n: usize,
    mean: Option<f64>,
    std: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n,
                mean: None,
                std: None,
                min: None,
                max: None,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Self {
            n,
            mean: Some(mean),
            std: Some(var.sqrt()),
            min: values.iter().copied().reduce(f64::min),
            max: values.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Debug, Serialize)]
struct MetricComparison {
    metric: &'static str,
    generated: Summary,
    held_out: Summary,
    /// Two-sample Kolmogorov-Smirnov statistic; absent if a set is empty.
    ks: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Failure {
    index: usize,
    error: String,
}

#[derive(Debug, Serialize)]
struct Report {
    requested: usize,
    generated: usize,
    held_out: usize,
    scale_m: f64,
    failures: Vec<Failure>,
    metrics: Vec<MetricComparison>,
    /// Every generated network has circuity >= 1.
    circuity_ok: bool,
    circuity_violations: Vec<String>,
}

fn sample_name(i: usize) -> String {
    format!("sample_{i:04}")
}

pub fn generate(ctx: &Ctx, args: &GenerateArgs) -> Result<()> {
    let node = load_node_model(&args.nodes)?;
    let (vgae, meta) = load_vgae(&args.vgae)?;
    let corpus = Corpus::load(&args.corpus)?;
    let scale_m = meta
        .get("scale_m")
        .and_then(serde_json::Value::as_f64)
        .unwrap_or(GenerateConfig::default().scale_m);
    let gen_cfg = GenerateConfig {
        max_nodes: ctx.cfg.n_cap,
        temperature: ctx.cfg.temperature,
        tau: ctx.cfg.tau,
        bernoulli: ctx.cfg.bernoulli,
        scale_m,
    };
    let count = ctx.cfg.count;
    // Two seeds per sample: the first attempt and the single retry.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let seeds: Vec<(u64, u64)> = (0..count).map(|_| (rng.random(), rng.random())).collect();

    let pool = ctx.pool()?;
    let outcomes: Vec<Result<StreetGraph, String>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &(first, retry))| {
                generate_network(&node, &vgae, &gen_cfg, first).or_else(|e| {
                    warn!("{}: {e}; retrying once", sample_name(i));
                    generate_network(&node, &vgae, &gen_cfg, retry).map_err(|e| e.to_string())
                })
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut generated = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(g) => {
                let name = sample_name(i);
                let path = ctx.path(&format!("generated/{name}.json"));
                std::fs::create_dir_all(path.parent().expect("has parent"))?;
                write_graph_file(&path, &g)?;
                generated.push((name, g));
            }
            Err(error) => {
                warn!("{}: failed twice: {error}", sample_name(i));
                failures.push(Failure { index: i, error });
            }
        }
    }
    if generated.is_empty() && count > 0 {
        bail!("no sample could be generated ({} failures)", failures.len());
    }

    let held_ids = meta_ids(&meta, "val_ids").unwrap_or_default();
    let mut held_out = Vec::new();
    for id in &held_ids {
        match corpus.index_of(id) {
            Some(i) => held_out.push((id.clone(), corpus.graph(i)?)),
            None => warn!("held-out graph {id} is not in the corpus"),
        }
    }

    let rows = |set: &[(String, StreetGraph)]| -> Vec<GraphRow> {
        pool.install(|| set.par_iter().map(|(id, g)| graph_row(id, g, &ctx.cfg)).collect())
    };
    let gen_rows = rows(&generated);
    let held_rows = rows(&held_out);

    let circuity_violations: Vec<String> = gen_rows
        .iter()
        .filter(|r| r.values[2].is_some_and(|c| c < 1.0 - CIRCUITY_SLACK))
        .map(|r| r.id.clone())
        .collect();
    if !circuity_violations.is_empty() {
        warn!("{} generated networks have circuity below 1", circuity_violations.len());
    }

    let column = |rows: &[GraphRow], m: usize| -> Vec<f64> { rows.iter().filter_map(|r| r.values[m]).collect() };
    let mut comparisons = Vec::new();
    let mut hist_rows = Vec::new();
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        let (a, b) = (column(&gen_rows, m), column(&held_rows, m));
        let ks = if a.is_empty() || b.is_empty() {
            None
        } else {
            Some(ks_statistic(&a, &b)?)
        };
        let all = a.iter().chain(&b);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let (edges, ga) = histogram(&a, lo, hi, HIST_BINS);
        let (_, gb) = histogram(&b, lo, hi, HIST_BINS);
        for (set, counts) in [("generated", &ga), ("held_out", &gb)] {
            for (i, c) in counts.iter().enumerate() {
                hist_rows.push([name.to_string(), set.to_string(), edges[i].to_string(), edges[i + 1].to_string(), c.to_string()]);
            }
        }
        let density = |c: &[usize], n: usize| -> Vec<f64> { c.iter().map(|&v| v as f64 / n.max(1) as f64).collect() };
        let labels: Vec<String> = edges[..HIST_BINS].iter().map(|e| format!("{e:.3}")).collect();
        let chart = svg::bar_chart(
            &format!("{name} (KS {})", ks.map_or("n/a".into(), |k| format!("{k:.3}"))),
            &labels,
            &[("generated", density(&ga, a.len())), ("held-out", density(&gb, b.len()))],
        );
        ctx.write(&format!("histograms/{name}.svg"), chart)?;
        comparisons.push(MetricComparison {
            metric: name,
            generated: Summary::of(&a),
            held_out: Summary::of(&b),
            ks,
        });
    }
    ctx.write(
        "histograms.csv",
        csv_text(&["metric", "set", "bin_lo", "bin_hi", "count"], hist_rows)?,
    )?;
    ctx.write("generated_metrics.csv", metrics_csv(&gen_rows)?)?;
    ctx.write("held_out_metrics.csv", metrics_csv(&held_rows)?)?;
    let report = Report {
        requested: count,
        generated: generated.len(),
        held_out: held_out.len(),
        scale_m,
        failures,
        metrics: comparisons,
        circuity_ok: circuity_violations.is_empty(),
        circuity_violations,
    };
    ctx.write_config()?;
    ctx.write_json("report.json", &report)?;
    info!("generated {} of {count} networks", report.generated);
    Ok(())
}
