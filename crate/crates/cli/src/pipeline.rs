//! Per-place preprocessing and the on-disk corpus layout.
//!
//! A corpus directory holds `corpus.json` (the manifest), `graphs/*.json`
//! (canonically ordered graphs in UTM meters), `tokens.jsonl` (one token
//! sequence per manifest entry, same order) and `places.json`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use streetvae::geom::{utm_project, UtmZone};
use streetvae::graph::{
    build_graph, canonicalize, flatten_sequence, quantize_graph, read_graph_file, simplify_merge, StreetGraph,
    TokenSeq,
};
use streetvae::ingest::{clip_box, PlaceRecord, RawStreetData};

use crate::config::PipelineConfig;

pub const MANIFEST: &str = "corpus.json";
pub const TOKENS: &str = "tokens.jsonl";
pub const PLACES: &str = "places.json";
pub const GRAPH_DIR: &str = "graphs";

/// One preprocessed place.
#[derive(Debug, Clone)]
pub struct ProcessedPlace {
    pub place: PlaceRecord,
    pub graph: StreetGraph,
    pub tokens: TokenSeq,
    pub zone: UtmZone,
}

impl ProcessedPlace {
    /// Bounding-box diagonal of the graph in meters.
    pub fn diagonal_m(&self) -> f64 {
        1.0 / self.graph.normalization.scale
    }
}

/// clip, project, build, merge, normalize, order, quantize, flatten.
pub fn process_place(data: &RawStreetData, place: &PlaceRecord, cfg: &PipelineConfig) -> Result<ProcessedPlace> {
    let clipped = clip_box(data, place.centroid, cfg.half_width_m)?;
    if clipped.is_empty() {
        bail!("no streets inside the study box");
    }
    let zone = UtmZone::containing(place.centroid);
    let polylines = clipped
        .polylines
        .iter()
        .map(|line| line.iter().map(|&p| utm_project(p, Some(zone)).map(|r| r.0)).collect())
        .collect::<streetvae::Result<Vec<Vec<_>>>>()?;
    let mut graph = simplify_merge(&build_graph(&polylines), cfg.merge_threshold_m);
    graph.crs = format!("utm/{zone}");
    if graph.num_nodes() < 2 || graph.num_edges() == 0 {
        bail!("degenerate network ({} nodes, {} edges)", graph.num_nodes(), graph.num_edges());
    }
    if graph.num_nodes() > cfg.n_cap {
        bail!("{} nodes exceed the cap of {}", graph.num_nodes(), cfg.n_cap);
    }
    graph.fit_normalization()?;
    let graph = canonicalize(&graph);
    let tokens = flatten_sequence(&quantize_graph(&graph));
    Ok(ProcessedPlace {
        place: place.clone(),
        graph,
        tokens,
        zone,
    })
}

/// A file-name-safe version of a place id.
pub fn sanitize_id(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "graph".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the corpus directory.
    pub file: String,
    pub nodes: usize,
    pub edges: usize,
    pub diagonal_m: f64,
    pub crs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedInput {
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub graphs: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedInput>,
}

/// A loaded corpus: manifest entries, token sequences and places in step.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub tokens: Vec<TokenSeq>,
    pub places: Vec<PlaceRecord>,
}

impl Corpus {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&manifest_path)
            .with_context(|| format!("no corpus at {} (run `preprocess` first)", dir.display()))?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
        let tokens = streetvae::corpus::read_token_corpus(&dir.join(TOKENS))?;
        if tokens.len() != manifest.graphs.len() {
            bail!(
                "{} lists {} graphs but {} has {} sequences",
                MANIFEST,
                manifest.graphs.len(),
                TOKENS,
                tokens.len()
            );
        }
        let places_path = dir.join(PLACES);
        let places = serde_json::from_str(
            &std::fs::read_to_string(&places_path).with_context(|| format!("reading {}", places_path.display()))?,
        )?;
        if manifest.graphs.is_empty() {
            bail!("corpus at {} is empty", dir.display());
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            tokens,
            places,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.graphs.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.manifest.graphs.iter().map(|e| e.id.clone()).collect()
    }

    pub fn graph(&self, i: usize) -> Result<StreetGraph> {
        let path = self.dir.join(&self.manifest.graphs[i].file);
        Ok(read_graph_file(&path)?)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.manifest.graphs.iter().position(|e| e.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use streetvae::geom::PointGeo;
    use streetvae::ingest::PlaceKind;

    fn place(lon: f64, lat: f64) -> PlaceRecord {
        PlaceRecord {
            id: "node/1".into(),
            name: "Test".into(),
            country: "DE".into(),
            place_kind: PlaceKind::Town,
            population: Some(5000),
            centroid: PointGeo { lon, lat },
        }
    }

    /// A plus-shaped crossing of two 2 km streets sharing the centroid vertex.
    fn cross(lon: f64, lat: f64) -> RawStreetData {
        let d = 0.02;
        let mut data = RawStreetData::default();
        data.push(vec![PointGeo { lon: lon - d, lat }, PointGeo { lon, lat }, PointGeo { lon: lon + d, lat }], "primary");
        data.push(vec![PointGeo { lon, lat: lat - d }, PointGeo { lon, lat }, PointGeo { lon, lat: lat + d }], "primary");
        data
    }

    #[test]
    fn crossing_becomes_a_clipped_star() {
        let cfg = PipelineConfig::default();
        let p = process_place(&cross(13.4, 52.5), &place(13.4, 52.5), &cfg).unwrap();
        assert_eq!(p.graph.num_nodes(), 5);
        assert_eq!(p.graph.num_edges(), 4);
        assert_eq!(p.tokens.num_nodes(), 5);
        assert_eq!(p.graph.crs, "utm/33N");
        for e in &p.graph.edges {
            assert!((p.graph.edge_length(e) - 500.0).abs() < 1.0, "{}", p.graph.edge_length(e));
        }
        assert!((p.diagonal_m() - 1000.0 * 2f64.sqrt()).abs() < 2.0);
    }

    #[test]
    fn empty_box_and_cap_are_errors() {
        let cfg = PipelineConfig::default();
        assert!(process_place(&cross(13.4, 52.5), &place(0.0, 0.0), &cfg).is_err());
        let tight = PipelineConfig {
            n_cap: 4,
            ..PipelineConfig::default()
        };
        assert!(process_place(&cross(13.4, 52.5), &place(13.4, 52.5), &tight).is_err());
    }

    #[test]
    fn ids_become_file_names() {
        assert_eq!(sanitize_id("node/123"), "node_123");
        assert_eq!(sanitize_id(""), "graph");
    }
}
