use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use log::info;
use streetvae::analysis::orientation_histogram;
use streetvae::graph::read_graph_file;

use super::Ctx;
use crate::svg;

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Graph JSON files to draw.
    #[arg(required = true)]
    pub graphs: Vec<PathBuf>,
}

/// Writes `<stem>.svg` (the network) and `<stem>_rose.svg` per graph.
pub fn plot(ctx: &Ctx, args: &PlotArgs) -> Result<()> {
    for path in &args.graphs {
        let g = read_graph_file(path)?;
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        ctx.write(&format!("{stem}.svg"), svg::network(&stem, &g))?;
        if let Ok(h) = orientation_histogram(&g, ctx.cfg.orientation_weighted) {
            ctx.write(&format!("{stem}_rose.svg"), svg::rose(&format!("{stem} orientation"), &h.bins))?;
        }
        info!("plotted {}", path.display());
    }
    Ok(())
}
