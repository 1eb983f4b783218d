//! End-to-end synthesis: sample vertices, embed them, decode an adjacency.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decode, reparameterize, Vgae};
use crate::error::{Error, Result};
use crate::geom::{dequantize, NormalizationRecord, PointXY};
use crate::graph::{flatten_sequence, AdjacencyMatrix, StreetGraph};
use crate::nodemodel::{sample_nodes, NodeModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub max_nodes: usize,
    pub temperature: f64,
    /// Keep edge `(i, j)` when `A'_ij > tau`.
    pub tau: f64,
    /// Draw each edge from `Bernoulli(A'_ij)` instead of thresholding.
    pub bernoulli: bool,
    /// Bounding-box diagonal in meters used to leave the normalized frame.
    pub scale_m: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            max_nodes: 512,
            temperature: 1.0,
            tau: 0.5,
            bernoulli: false,
            // Diagonal of the default 1 km clipping box.
            scale_m: 1000.0 * std::f64::consts::SQRT_2,
        }
    }
}

/// Samples one street network. Node positions come back in meters around
/// the origin; repeated quantized vertices are collapsed before embedding.
pub fn generate_network(node: &NodeModel, vgae: &Vgae, cfg: &GenerateConfig, seed: u64) -> Result<StreetGraph> {
    if node.config.d_model != vgae.config.in_dim {
        return Err(Error::Shape {
            op: "generate",
            lhs: vec![node.config.d_model],
            rhs: vec![vgae.config.in_dim],
        });
    }
    if !(cfg.scale_m > 0.0) || !(0.0..=1.0).contains(&cfg.tau) {
        return Err(Error::Argument("generation needs scale_m > 0 and tau in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_seed = rng.random::<u64>();
    let latent_seed = rng.random::<u64>();
    let mut points = sample_nodes(node, cfg.max_nodes, cfg.temperature, node_seed)?;
    let mut seen = std::collections::HashSet::new();
    points.retain(|q| seen.insert(*q));
    let n = points.len();
    if n < 2 {
        return Err(Error::Generation(format!("only {n} distinct nodes sampled")));
    }
    let features = node.node_embeddings(&flatten_sequence(&points))?;
    let (mu, log_var) = vgae.encode(&AdjacencyMatrix::identity(n), &features)?;
    let latent = reparameterize(&mu, &log_var, latent_seed)?;
    let probs = decode(&latent.z)?;

    let nodes: Vec<PointXY> = points
        .iter()
        .map(|&q| {
            let p = dequantize(q);
            PointXY::new(p.x * cfg.scale_m, p.y * cfg.scale_m)
        })
        .collect();
    let mut g = StreetGraph::new(nodes);
    g.normalization = NormalizationRecord {
        center: [0.0, 0.0],
        scale: 1.0 / cfg.scale_m,
    };
    for i in 0..n {
        for j in i + 1..n {
            let p = probs.get(i, j);
            let keep = if cfg.bernoulli { rng.random::<f64>() < p } else { p > cfg.tau };
            if keep {
                g.add_edge(i, j, None)?;
            }
        }
    }
    Ok(g)
}
