use std::time::Duration;

use anyhow::Result;
use clap::Args;
use log::info;
use streetvae::ingest::{fetch_overpass, OverpassQuery, DEFAULT_OVERPASS_URL};

use super::Ctx;

/// Environment variable overriding the Overpass endpoint.
pub const ENDPOINT_ENV: &str = "STREETVAE_OVERPASS_URL";

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub south: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub west: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub north: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub east: f64,
    /// Regex over highway values, e.g. `^(primary|secondary|residential)$`.
    #[arg(long)]
    pub highway: Option<String>,
    /// File name of the extract inside the output directory.
    #[arg(long, default_value = "extract.osm")]
    pub name: String,
}

pub fn fetch(ctx: &Ctx, args: &FetchArgs) -> Result<()> {
    let endpoint = std::env::var(ENDPOINT_ENV).unwrap_or_else(|_| DEFAULT_OVERPASS_URL.to_string());
    let query = OverpassQuery {
        south: args.south,
        west: args.west,
        north: args.north,
        east: args.east,
        highway_filter: args.highway.clone(),
    };
    let body = fetch_overpass(&endpoint, &query, Duration::from_secs(ctx.cfg.fetch_timeout_s))?;
    let path = ctx.write(&args.name, &body)?;
    info!("wrote {} bytes to {}", body.len(), path.display());
    Ok(())
}
