//! Seeded synthetic street networks for tests, smoke training and demos.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::geom::PointXY;
use crate::graph::StreetGraph;
use crate::tensor::Tensor;

/// `rows x cols` lattice with `spacing` meters between neighbors. Node
/// `r * cols + c` sits at `(c * spacing, r * spacing)`.
pub fn grid(rows: usize, cols: usize, spacing: f64) -> StreetGraph {
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(PointXY::new(c as f64 * spacing, r as f64 * spacing));
        }
    }
    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                pairs.push((i, i + 1));
            }
            if r + 1 < rows {
                pairs.push((i, i + cols));
            }
        }
    }
    StreetGraph::from_edges(nodes, &pairs).expect("lattice edges are valid")
}

/// Removes edges in random order while the graph stays connected, each
/// candidate with probability `drop_prob`.
pub fn drop_edges_connected<R: Rng + ?Sized>(g: &StreetGraph, drop_prob: f64, rng: &mut R) -> StreetGraph {
    let mut order: Vec<usize> = (0..g.num_edges()).collect();
    order.shuffle(rng);
    let mut keep = vec![true; g.num_edges()];
    for i in order {
        if !rng.random_bool(drop_prob.clamp(0.0, 1.0)) {
            continue;
        }
        keep[i] = false;
        let trial = subgraph(g, &keep);
        if !trial.is_connected() {
            keep[i] = true;
        }
    }
    subgraph(g, &keep)
}

fn subgraph(g: &StreetGraph, keep: &[bool]) -> StreetGraph {
    let mut out = g.clone();
    out.edges = g
        .edges
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(e, _)| e.clone())
        .collect();
    out
}

/// Moves every node by up to `jitter` meters per axis. With `jitter` below a
/// quarter of the lattice spacing a grid stays planar.
pub fn jitter_nodes<R: Rng + ?Sized>(g: &StreetGraph, jitter: f64, rng: &mut R) -> StreetGraph {
    let mut out = g.clone();
    if jitter > 0.0 {
        for p in &mut out.nodes {
            p.x += rng.random_range(-jitter..jitter);
            p.y += rng.random_range(-jitter..jitter);
        }
    }
    out
}

/// A random connected planar graph: a jittered lattice with random edge
/// deletions that preserve connectivity.
pub fn random_connected_planar<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> StreetGraph {
    let spacing = 100.0;
    let g = jitter_nodes(&grid(rows, cols, spacing), 0.2 * spacing, rng);
    let p = rng.random_range(0.1..0.6);
    drop_edges_connected(&g, p, rng)
}

/// A perturbed street grid of random size with at most `max_nodes` nodes.
pub fn perturbed_grid<R: Rng + ?Sized>(max_nodes: usize, spacing: f64, rng: &mut R) -> StreetGraph {
    let side = (max_nodes as f64).sqrt().floor().max(2.0) as usize;
    let rows = rng.random_range(2..=side);
    let max_cols = (max_nodes / rows).clamp(2, side.max(2));
    let cols = rng.random_range(2..=max_cols);
    let g = jitter_nodes(&grid(rows, cols, spacing), 0.15 * spacing, rng);
    drop_edges_connected(&g, 0.15, rng)
}

/// Points on a regular `k`-gon of circumradius `r` centered at the origin.
pub fn regular_polygon(k: usize, r: f64) -> Vec<PointXY> {
    (0..k)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            PointXY::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

/// Deterministic sinusoidal features of normalized coordinates: `dim / 4`
/// geometrically spaced frequencies per axis, each as a sine/cosine pair.
/// A stand-in for learned node embeddings when only the graph side matters.
pub fn coordinate_features(points: &[PointXY], dim: usize) -> Tensor {
    let per_axis = (dim / 4).max(1);
    let mut data = Vec::with_capacity(points.len() * dim);
    for p in points {
        let mut row = Vec::with_capacity(dim);
        for axis in [p.x, p.y] {
            for k in 0..per_axis {
                let freq = std::f64::consts::PI * 2f64.powf(6.0 * k as f64 / per_axis as f64);
                row.push((freq * axis).sin());
                row.push((freq * axis).cos());
            }
        }
        row.resize(dim, 0.0);
        data.extend(row);
    }
    Tensor::matrix(points.len(), dim, data).expect("sized data")
}
