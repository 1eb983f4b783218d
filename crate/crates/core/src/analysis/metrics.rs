use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{min_enclosing_circle, polygon_area_perimeter};
use crate::graph::{extract_faces, face_polygon, StreetGraph};

/// Faces whose refined area is at or below this (m²) are not blocks.
const MIN_BLOCK_AREA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub avg_street_length: f64,
    /// `2E / N`.
    pub avg_streets_per_node: f64,
    /// Total geometric length over total endpoint distance.
    pub avg_circuity: f64,
    /// Mean of per-edge ratios, skipping zero-length chords.
    pub mean_edge_circuity: f64,
}

pub fn topo_metrics(g: &StreetGraph) -> Result<GraphMetrics> {
    if g.num_edges() == 0 || g.num_nodes() == 0 {
        return Err(Error::Metrics("graph has no edges".into()));
    }
    let mut length = 0.0;
    let mut chord = 0.0;
    let mut ratio_sum = 0.0;
    let mut ratio_count = 0usize;
    for e in &g.edges {
        let l = g.edge_length(e);
        let c = g.edge_chord(e);
        length += l;
        chord += c;
        if c > 0.0 {
            ratio_sum += l / c;
            ratio_count += 1;
        }
    }
    if !(chord > 0.0) {
        return Err(Error::Metrics("every edge has coincident endpoints".into()));
    }
    Ok(GraphMetrics {
        avg_street_length: length / g.num_edges() as f64,
        avg_streets_per_node: 2.0 * g.num_edges() as f64 / g.num_nodes() as f64,
        avg_circuity: length / chord,
        mean_edge_circuity: if ratio_count > 0 { ratio_sum / ratio_count as f64 } else { f64::NAN },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockOptions {
    /// Drop blocks that share a vertex with the outer face.
    pub exclude_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRow {
    pub face: usize,
    pub area: f64,
    pub perimeter: f64,
    pub form_factor: f64,
    pub compactness: f64,
    pub touches_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockMetrics {
    pub avg_area: f64,
    pub avg_form_factor: f64,
    pub avg_compactness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    /// `None` when no face qualifies as a block.
    pub summary: Option<BlockMetrics>,
    pub blocks: Vec<BlockRow>,
    pub zero_area_excluded: usize,
    pub boundary_excluded: usize,
}

/// Per-block area, form factor (area over the minimum enclosing circle's
/// area) and compactness (perimeter over area) on the interior faces.
pub fn block_metrics(g: &StreetGraph, opts: BlockOptions) -> Result<BlockReport> {
    let faces = extract_faces(g)?;
    let outer_nodes: std::collections::HashSet<usize> = faces
        .iter()
        .filter(|f| f.is_outer || f.signed_area < 0.0)
        .flat_map(|f| f.ring.iter().copied())
        .collect();
    let mut report = BlockReport {
        summary: None,
        blocks: Vec::new(),
        zero_area_excluded: 0,
        boundary_excluded: 0,
    };
    for (idx, face) in faces.iter().enumerate() {
        // Clockwise walks bound components from outside; they are not blocks.
        if face.is_outer || face.signed_area < -MIN_BLOCK_AREA {
            continue;
        }
        let ring = face_polygon(g, face);
        let area = if ring.len() >= 3 { polygon_area_perimeter(&ring)?.0 } else { 0.0 };
        if face.signed_area <= MIN_BLOCK_AREA || area <= MIN_BLOCK_AREA {
            report.zero_area_excluded += 1;
            continue;
        }
        let touches_boundary = face.ring.iter().any(|v| outer_nodes.contains(v));
        if opts.exclude_boundary && touches_boundary {
            report.boundary_excluded += 1;
            continue;
        }
        let (area, perimeter) = polygon_area_perimeter(&ring)?;
        let circle = min_enclosing_circle(&ring)?;
        report.blocks.push(BlockRow {
            face: idx,
            area,
            perimeter,
            form_factor: area / circle.area(),
            compactness: perimeter / area,
            touches_boundary,
        });
    }
    if !report.blocks.is_empty() {
        let n = report.blocks.len() as f64;
        let mean = |f: fn(&BlockRow) -> f64| report.blocks.iter().map(f).sum::<f64>() / n;
        report.summary = Some(BlockMetrics {
            avg_area: mean(|b| b.area),
            avg_form_factor: mean(|b| b.form_factor),
            avg_compactness: mean(|b| b.compactness),
        });
    }
    Ok(report)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metrics("KS statistic of an empty sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Metrics("KS statistic of non-finite values".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    Ok(d)
}
