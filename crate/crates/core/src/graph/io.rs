use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, StreetGraph};
use crate::error::{Error, Result};
use crate::geom::{NormalizationRecord, PointXY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeEntry {
    id: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EdgeEntry {
    u: usize,
    v: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry: Option<Vec<[f64; 2]>>,
}

/// On-disk graph document. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    crs: String,
    normalization: NormalizationRecord,
    nodes: Vec<NodeEntry>,
    edges: Vec<EdgeEntry>,
}

impl From<&StreetGraph> for GraphFile {
    fn from(g: &StreetGraph) -> Self {
        GraphFile {
            crs: g.crs.clone(),
            normalization: g.normalization,
            nodes: g
                .nodes
                .iter()
                .enumerate()
                .map(|(id, p)| NodeEntry { id, x: p.x, y: p.y })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeEntry {
                    u: e.u,
                    v: e.v,
                    geometry: e.geometry.as_ref().map(|g| g.iter().map(|p| [p.x, p.y]).collect()),
                })
                .collect(),
        }
    }
}

impl TryFrom<GraphFile> for StreetGraph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Self> {
        let n = f.nodes.len();
        let mut nodes = vec![None; n];
        for e in &f.nodes {
            match nodes.get_mut(e.id) {
                Some(slot @ None) => *slot = Some(PointXY::new(e.x, e.y)),
                _ => {
                    return Err(Error::InvalidGraph(format!(
                        "node ids must be unique and dense in 0..{n}, found {}",
                        e.id
                    )))
                }
            }
        }
        let g = StreetGraph {
            nodes: nodes.into_iter().map(|p| p.expect("every slot filled")).collect(),
            edges: f
                .edges
                .into_iter()
                .map(|e| Edge {
                    u: e.u,
                    v: e.v,
                    geometry: e.geometry.map(|g| g.into_iter().map(|[x, y]| PointXY::new(x, y)).collect()),
                })
                .collect(),
            crs: f.crs,
            normalization: f.normalization,
        };
        g.validate()?;
        Ok(g)
    }
}

impl StreetGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphFile::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

pub fn write_graph_file(path: &Path, g: &StreetGraph) -> Result<()> {
    std::fs::write(path, g.to_json() + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_graph_file(path: &Path) -> Result<StreetGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    StreetGraph::from_json(&text)
}
