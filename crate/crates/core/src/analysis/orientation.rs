use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::bearing;
use crate::graph::StreetGraph;

pub const ORIENTATION_BINS: usize = 36;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientationHistogram {
    /// Bin `i` covers bearings `[10i - 5, 10i + 5)` degrees, so bin 0 is north.
    pub bins: Vec<f64>,
    /// Shannon entropy of the normalized bins, in nats.
    pub entropy: f64,
    /// Edges skipped because their endpoints coincide.
    pub skipped: usize,
}

fn bin_of(b: f64) -> usize {
    (((b + 5.0).rem_euclid(360.0)) / 10.0).floor() as usize % ORIENTATION_BINS
}

/// Bidirectional bearing histogram of the edge chords. Each edge adds its
/// bearing both ways, weighted by geometric length or by 1.
pub fn orientation_histogram(g: &StreetGraph, length_weighted: bool) -> Result<OrientationHistogram> {
    if g.num_edges() == 0 {
        return Err(Error::Metrics("orientation of a graph without edges".into()));
    }
    let mut bins = vec![0.0; ORIENTATION_BINS];
    let mut skipped = 0;
    for e in &g.edges {
        let (a, b) = (g.nodes[e.u], g.nodes[e.v]);
        let Ok(forward) = bearing(a, b) else {
            skipped += 1;
            continue;
        };
        let backward = bearing(b, a)?;
        let w = if length_weighted { g.edge_length(e) } else { 1.0 };
        bins[bin_of(forward)] += w;
        bins[bin_of(backward)] += w;
    }
    let total: f64 = bins.iter().sum();
    let entropy = if total > 0.0 {
        -bins
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * p.ln()
            })
            .sum::<f64>()
    } else {
        0.0
    };
    Ok(OrientationHistogram {
        bins,
        entropy: entropy.max(0.0),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_edges() {
        assert_eq!(bin_of(0.0), 0);
        assert_eq!(bin_of(4.999), 0);
        assert_eq!(bin_of(5.0), 1);
        assert_eq!(bin_of(355.0), 0);
        assert_eq!(bin_of(354.999), 35);
        assert_eq!(bin_of(180.0), 18);
    }
}
