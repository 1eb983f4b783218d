//! The `streetvae` command-line pipeline: preprocess extracts into a
//! corpus, train the node model and the graph autoencoder, embed, generate,
//! measure, cluster and plot.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Arg, ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::{error, info};

use commands::{
    ClusterArgs, Ctx, EmbedArgs, FetchArgs, GenerateArgs, MetricsArgs, PlotArgs, PreprocessArgs, TrainNodesArgs,
    TrainVgaeArgs,
};
use config::{PipelineConfig, KEYS};

#[derive(Debug, Parser)]
#[command(name = "streetvae", version, about = "Street network representation learning")]
pub struct Cli {
    /// Key-value configuration file; command-line flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "streetvae-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn extracts into graphs, token sequences and size statistics.
    Preprocess(PreprocessArgs),
    /// Train the node model or the graph autoencoder.
    #[command(subcommand)]
    Train(TrainKind),
    /// Write PCA-reduced graph embeddings.
    Embed(EmbedArgs),
    /// Sample networks and compare their metrics with held-out graphs.
    Generate(GenerateArgs),
    /// Per-graph topological, block and orientation metrics.
    Metrics(MetricsArgs),
    /// k-means, elbow curve and per-country summaries of embeddings.
    Cluster(ClusterArgs),
    /// Draw graphs and their orientation roses as SVG.
    Plot(PlotArgs),
    /// Download an OSM extract for a bounding box from Overpass.
    Fetch(FetchArgs),
    /// Check the configured pipeline constants against their reference values.
    SelfTest,
}

#[derive(Debug, Subcommand)]
pub enum TrainKind {
    Nodes(TrainNodesArgs),
    Vgae(TrainVgaeArgs),
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// The derived interface plus one global flag per configuration key.
pub fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for (key, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .global(true)
                .value_name("VALUE")
                .help(*help)
                .help_heading("Configuration"),
        );
    }
    cmd
}

fn leaf(m: &ArgMatches) -> &ArgMatches {
    match m.subcommand() {
        Some((_, sub)) => leaf(sub),
        None => m,
    }
}

/// Config file (if any), then flags, then validation.
fn effective_config(cli: &Cli, matches: &ArgMatches) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let m = leaf(matches);
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)
                .map_err(|e| commands::UsageError(format!("--{}: {e:#}", flag_name(key))))?;
        }
    }
    cfg.validate().map_err(|e| commands::UsageError(format!("{e:#}")))?;
    Ok(cfg)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let cfg = effective_config(&cli, &matches)?;
    let ctx = Ctx::new(cfg, cli.out.clone());
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess(&ctx, a),
        Command::Train(TrainKind::Nodes(a)) => commands::train_nodes(&ctx, a),
        Command::Train(TrainKind::Vgae(a)) => commands::train_vgae(&ctx, a),
        Command::Embed(a) => commands::embed(&ctx, a),
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Metrics(a) => commands::metrics(&ctx, a),
        Command::Cluster(a) => commands::cluster(&ctx, a),
        Command::Plot(a) => commands::plot(&ctx, a),
        Command::Fetch(a) => commands::fetch(&ctx, a),
        Command::SelfTest => self_test(&ctx),
    }
}

fn self_test(ctx: &Ctx) -> Result<()> {
    let checks = config::self_test(&ctx.cfg);
    for c in &checks {
        let status = if c.ok { "PASS" } else { "FAIL" };
        info!("{status} {}: expected {}, configured {}", c.name, c.expected, c.actual);
    }
    ctx.write_json("self_test.json", &checks)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.ok).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        error!("{} constants differ from their reference values", failed.len());
        anyhow::bail!("self-test failed: {}", failed.join(", "))
    }
}

/// Exit status for an error: 2 for misuse, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let usage = err.chain().any(|e| {
        e.is::<commands::UsageError>()
            || e.is::<clap::Error>()
            || matches!(e.downcast_ref::<streetvae::Error>(), Some(streetvae::Error::Usage(_)))
    });
    if usage {
        2
    } else {
        1
    }
}
