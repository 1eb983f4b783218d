use serde::{Deserialize, Serialize};

use super::StreetGraph;
use crate::error::{Error, Result};
use crate::geom::{quantize, QuantizedPoint};

/// Token values 0..=255 are quantized coordinates; these close the vocabulary.
pub const STOP: u16 = 256;
pub const START: u16 = 257;
pub const PAD: u16 = 258;
pub const VOCAB: usize = 259;

/// `[START, qx1, qy1, .., qxN, qyN, STOP]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<u16>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[u16] {
        &self.0
    }

    /// Node count implied by a well-formed sequence.
    pub fn num_nodes(&self) -> usize {
        self.0.len().saturating_sub(2) / 2
    }
}

/// Canonical node order: ascending y, then x, then id.
pub fn order_nodes(g: &StreetGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.num_nodes()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (g.nodes[a], g.nodes[b]);
        pa.y.total_cmp(&pb.y)
            .then(pa.x.total_cmp(&pb.x))
            .then(a.cmp(&b))
    });
    order
}

/// `g` relabeled into canonical order with edges sorted by `(u, v)`.
pub fn canonicalize(g: &StreetGraph) -> StreetGraph {
    g.permuted(&order_nodes(g)).expect("order_nodes is a permutation")
}

/// Quantizes the normalized node coordinates, in the graph's own node order.
pub fn quantize_graph(g: &StreetGraph) -> Vec<QuantizedPoint> {
    g.normalized_nodes().into_iter().map(quantize).collect()
}

pub fn flatten_sequence(points: &[QuantizedPoint]) -> TokenSeq {
    let mut t = Vec::with_capacity(2 * points.len() + 2);
    t.push(START);
    for q in points {
        t.push(u16::from(q.qx));
        t.push(u16::from(q.qy));
    }
    t.push(STOP);
    TokenSeq(t)
}

/// Inverse of [`flatten_sequence`]; rejects anything off the grammar.
pub fn detokenize(seq: &TokenSeq) -> Result<Vec<QuantizedPoint>> {
    let t = &seq.0;
    if t.len() < 2 || t[0] != START || t[t.len() - 1] != STOP {
        return Err(Error::Input("sequence must start with START and end with STOP".into()));
    }
    let body = &t[1..t.len() - 1];
    if body.len() % 2 != 0 {
        return Err(Error::Input("odd number of coordinate tokens".into()));
    }
    body.chunks_exact(2)
        .map(|c| match (u8::try_from(c[0]), u8::try_from(c[1])) {
            (Ok(qx), Ok(qy)) => Ok(QuantizedPoint { qx, qy }),
            _ => Err(Error::Input(format!("special token {:?} inside the sequence", c))),
        })
        .collect()
}
