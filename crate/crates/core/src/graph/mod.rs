//! Undirected street graphs: construction from polylines, node merging,
//! normalized adjacency, canonical ordering and token sequences, and planar
//! face extraction.

mod adjacency;
mod build;
mod faces;
mod io;
mod sequence;

pub use adjacency::{normalize_adjacency, AdjacencyMatrix};
pub use build::{build_graph, simplify_merge, DEFAULT_MERGE_THRESHOLD_M, SNAP_TOLERANCE_M};
pub use faces::{extract_faces, face_polygon, find_crossing, Face};
pub use io::{read_graph_file, write_graph_file, GraphFile};
pub use sequence::{
    canonicalize, detokenize, flatten_sequence, order_nodes, quantize_graph, TokenSeq, PAD, START, STOP, VOCAB,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{center_and_normalize, polyline_length, NormalizationRecord, PointXY};

/// An undirected edge stored with `u < v`. `geometry`, when present, runs
/// from node `u` to node `v` and includes both endpoint coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Vec<PointXY>>,
}

/// Node `i` sits at `nodes[i]`; ids are the dense indices `0..N`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreetGraph {
    pub nodes: Vec<PointXY>,
    pub edges: Vec<Edge>,
    /// Coordinate frame label, e.g. `utm/31N`.
    pub crs: String,
    /// Maps node coordinates into the unit-diagonal frame.
    pub normalization: NormalizationRecord,
}

impl StreetGraph {
    pub fn new(nodes: Vec<PointXY>) -> Self {
        Self {
            nodes,
            ..Self::default()
        }
    }

    /// Builds a graph from `(u, v)` pairs, validating every invariant.
    pub fn from_edges(nodes: Vec<PointXY>, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(nodes);
        for &(u, v) in pairs {
            g.add_edge(u, v, None)?;
        }
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Adds an undirected edge. Self-loops are rejected; a duplicate of an
    /// existing edge is ignored and `Ok(false)` returned.
    pub fn add_edge(&mut self, u: usize, v: usize, geometry: Option<Vec<PointXY>>) -> Result<bool> {
        let n = self.nodes.len();
        if u >= n || v >= n {
            return Err(Error::InvalidGraph(format!("edge ({u}, {v}) references a missing node")));
        }
        if u == v {
            return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
        }
        if self.edges.iter().any(|e| (e.u, e.v) == (u.min(v), u.max(v))) {
            return Ok(false);
        }
        let mut geometry = geometry.filter(|g| g.len() > 2);
        if let Some(geom) = &mut geometry {
            if u > v {
                geom.reverse();
            }
        }
        let (u, v) = (u.min(v), u.max(v));
        if let Some(geom) = &geometry {
            if geom[0] != self.nodes[u] || geom[geom.len() - 1] != self.nodes[v] {
                return Err(Error::InvalidGraph(format!(
                    "geometry of edge ({u}, {v}) does not end at its nodes"
                )));
            }
        }
        self.edges.push(Edge { u, v, geometry });
        Ok(true)
    }

    /// Checks the structural invariants of a graph assembled by hand.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for p in &self.nodes {
            if !p.is_finite() {
                return Err(Error::InvalidGraph("non-finite node coordinate".into()));
            }
        }
        for e in &self.edges {
            if e.u >= e.v || e.v >= self.nodes.len() {
                return Err(Error::InvalidGraph(format!("edge ({}, {}) is not stored as u < v < N", e.u, e.v)));
            }
            if !seen.insert((e.u, e.v)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
            if let Some(g) = &e.geometry {
                if g.len() < 2 || g[0] != self.nodes[e.u] || g[g.len() - 1] != self.nodes[e.v] {
                    return Err(Error::InvalidGraph(format!(
                        "geometry of edge ({}, {}) does not end at its nodes",
                        e.u, e.v
                    )));
                }
            }
        }
        Ok(())
    }

    /// The edge's polyline from `u` to `v`: its geometry, or the straight chord.
    pub fn edge_polyline(&self, e: &Edge) -> Vec<PointXY> {
        match &e.geometry {
            Some(g) => g.clone(),
            None => vec![self.nodes[e.u], self.nodes[e.v]],
        }
    }

    pub fn edge_length(&self, e: &Edge) -> f64 {
        match &e.geometry {
            Some(g) => polyline_length(g).unwrap_or(0.0),
            None => self.nodes[e.u].distance(self.nodes[e.v]),
        }
    }

    pub fn edge_chord(&self, e: &Edge) -> f64 {
        self.nodes[e.u].distance(self.nodes[e.v])
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[e.u] += 1;
            d[e.v] += 1;
        }
        d
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        adj
    }

    /// Component label per node, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.neighbors();
        let mut label = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for s in 0..self.nodes.len() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Relabels nodes so that new node `i` is old node `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<StreetGraph> {
        let n = self.nodes.len();
        let mut new_id = vec![usize::MAX; n];
        if order.len() != n {
            return Err(Error::Argument(format!("permutation of length {} for {n} nodes", order.len())));
        }
        for (i, &old) in order.iter().enumerate() {
            if old >= n || new_id[old] != usize::MAX {
                return Err(Error::Argument("order is not a permutation".into()));
            }
            new_id[old] = i;
        }
        let mut g = StreetGraph {
            nodes: order.iter().map(|&o| self.nodes[o]).collect(),
            edges: Vec::with_capacity(self.edges.len()),
            crs: self.crs.clone(),
            normalization: self.normalization,
        };
        for e in &self.edges {
            g.add_edge(new_id[e.u], new_id[e.v], e.geometry.clone())?;
        }
        g.edges.sort_by_key(|e| (e.u, e.v));
        Ok(g)
    }

    /// Applies `f` to every node and geometry vertex.
    pub fn map_coords(&self, f: impl Fn(PointXY) -> PointXY) -> StreetGraph {
        StreetGraph {
            nodes: self.nodes.iter().map(|&p| f(p)).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    u: e.u,
                    v: e.v,
                    geometry: e.geometry.as_ref().map(|g| g.iter().map(|&p| f(p)).collect()),
                })
                .collect(),
            crs: self.crs.clone(),
            normalization: self.normalization,
        }
    }

    /// Node coordinates in the unit-diagonal frame.
    pub fn normalized_nodes(&self) -> Vec<PointXY> {
        self.nodes.iter().map(|&p| self.normalization.apply(p)).collect()
    }

    /// Fits the normalization to this graph's own nodes (bounding-box center,
    /// unit diagonal). Fails on a single point or coincident nodes.
    pub fn fit_normalization(&mut self) -> Result<()> {
        let (_, record) = center_and_normalize(&self.nodes)?;
        self.normalization = record;
        Ok(())
    }

    /// Dense 0/1 adjacency without self-loops, row-major.
    pub fn adjacency_dense(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut a = vec![0.0; n * n];
        for e in &self.edges {
            a[e.u * n + e.v] = 1.0;
            a[e.v * n + e.u] = 1.0;
        }
        a
    }
}
