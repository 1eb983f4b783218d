use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use log::{info, warn};
use rayon::prelude::*;
use streetvae::corpus::write_token_corpus;
use streetvae::graph::write_graph_file;
use streetvae::ingest::{filter_places, parse_extract, ExtractFormat, PlaceRecord, RawStreetData};

use super::{csv_text, histogram, Ctx};
use crate::pipeline::{
    process_place, sanitize_id, Manifest, ManifestEntry, ProcessedPlace, SkippedInput, GRAPH_DIR, MANIFEST, PLACES,
    TOKENS,
};
use crate::svg;

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory of `.geojson`/`.json`/`.osm`/`.xml` extracts.
    #[arg(long)]
    pub input: PathBuf,
}

const SIZE_BINS: usize = 20;

pub fn preprocess(ctx: &Ctx, args: &PreprocessArgs) -> Result<()> {
    let mut files: Vec<(PathBuf, ExtractFormat)> = std::fs::read_dir(&args.input)
        .with_context(|| format!("reading input directory {}", args.input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let fmt = ExtractFormat::from_extension(p.extension()?.to_str()?)?;
            p.is_file().then_some((p, fmt))
        })
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    if files.is_empty() {
        bail!("no inputs: {} holds no .geojson, .json, .osm or .xml files", args.input.display());
    }

    let mut skipped = Vec::new();
    let mut extracts: Vec<(String, RawStreetData, Vec<PlaceRecord>)> = Vec::new();
    for (path, fmt) in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let parsed = std::fs::read(path)
            .map_err(anyhow::Error::from)
            .and_then(|bytes| parse_extract(&bytes, *fmt).map_err(Into::into));
        match parsed {
            Ok((streets, places)) => {
                let kept = filter_places(&places, ctx.cfg.min_population);
                info!("{name}: {} polylines, {} of {} places kept", streets.len(), kept.len(), places.len());
                if kept.is_empty() {
                    skipped.push(SkippedInput {
                        source: name.clone(),
                        reason: "no place above the population floor".into(),
                    });
                }
                extracts.push((name, streets, kept));
            }
            Err(e) => {
                warn!("skipping {name}: {e:#}");
                skipped.push(SkippedInput {
                    source: name,
                    reason: format!("{e:#}"),
                });
            }
        }
    }

    let tasks: Vec<(usize, &PlaceRecord)> = extracts
        .iter()
        .enumerate()
        .flat_map(|(i, (_, _, places))| places.iter().map(move |p| (i, p)))
        .collect();
    let results: Vec<Result<ProcessedPlace>> = ctx
        .pool()?
        .install(|| tasks.par_iter().map(|&(i, p)| process_place(&extracts[i].1, p, &ctx.cfg)).collect());

    // Sorted by id; the first file (in name order) wins a duplicate id.
    let mut by_id: BTreeMap<String, ProcessedPlace> = BTreeMap::new();
    for (&(i, place), result) in tasks.iter().zip(results) {
        let source = format!("{}#{}", extracts[i].0, place.id);
        match result {
            Ok(p) if by_id.contains_key(&p.place.id) => {
                warn!("skipping {source}: duplicate place id");
                skipped.push(SkippedInput {
                    source,
                    reason: "duplicate place id".into(),
                });
            }
            Ok(p) => {
                by_id.insert(p.place.id.clone(), p);
            }
            Err(e) => {
                warn!("skipping {source}: {e:#}");
                skipped.push(SkippedInput {
                    source,
                    reason: format!("{e:#}"),
                });
            }
        }
    }
    if by_id.is_empty() {
        bail!("every input failed; nothing was written ({} inputs skipped)", skipped.len());
    }

    let mut used_names = std::collections::HashSet::new();
    let mut manifest = Manifest {
        graphs: Vec::new(),
        skipped,
    };
    let mut tokens = Vec::new();
    let mut places = Vec::new();
    for (id, p) in &by_id {
        let mut stem = sanitize_id(id);
        let base = stem.clone();
        let mut n = 1;
        while !used_names.insert(stem.clone()) {
            stem = format!("{base}-{n}");
            n += 1;
        }
        let file = format!("{GRAPH_DIR}/{stem}.json");
        let path = ctx.path(&file);
        std::fs::create_dir_all(ctx.path(GRAPH_DIR))?;
        write_graph_file(&path, &p.graph)?;
        manifest.graphs.push(ManifestEntry {
            id: id.clone(),
            file,
            nodes: p.graph.num_nodes(),
            edges: p.graph.num_edges(),
            diagonal_m: p.diagonal_m(),
            crs: p.graph.crs.clone(),
        });
        tokens.push(p.tokens.clone());
        places.push(p.place.clone());
    }
    write_token_corpus(&ctx.path(TOKENS), &tokens)?;
    ctx.write_json(PLACES, &places)?;
    write_size_stats(ctx, &manifest.graphs)?;
    ctx.write_config()?;
    // The manifest goes last: its presence marks a complete corpus.
    ctx.write_json(MANIFEST, &manifest)?;
    info!(
        "wrote {} graphs to {} ({} inputs skipped)",
        manifest.graphs.len(),
        ctx.out.display(),
        manifest.skipped.len()
    );
    Ok(())
}

/// Node and edge count distributions as CSV plus one SVG each.
fn write_size_stats(ctx: &Ctx, entries: &[ManifestEntry]) -> Result<()> {
    let sizes = csv_text(
        &["id", "nodes", "edges"],
        entries.iter().map(|e| [e.id.clone(), e.nodes.to_string(), e.edges.to_string()]),
    )?;
    ctx.write("stats/sizes.csv", sizes)?;

    let mut rows = Vec::new();
    for (kind, values) in [
        ("nodes", entries.iter().map(|e| e.nodes as f64).collect::<Vec<_>>()),
        ("edges", entries.iter().map(|e| e.edges as f64).collect()),
    ] {
        let hi = values.iter().copied().fold(0.0, f64::max);
        let (edges, counts) = histogram(&values, 0.0, hi.max(1.0), SIZE_BINS);
        let labels: Vec<String> = edges[..SIZE_BINS].iter().map(|e| format!("{e:.0}")).collect();
        let svg = svg::bar_chart(
            &format!("Number of {kind} per network"),
            &labels,
            &[("", counts.iter().map(|&c| c as f64).collect())],
        );
        ctx.write(&format!("stats/{kind}_histogram.svg"), svg)?;
        for (i, c) in counts.iter().enumerate() {
            rows.push([kind.to_string(), edges[i].to_string(), edges[i + 1].to_string(), c.to_string()]);
        }
    }
    ctx.write("stats/size_histogram.csv", csv_text(&["quantity", "bin_lo", "bin_hi", "count"], rows)?)?;
    Ok(())
}
