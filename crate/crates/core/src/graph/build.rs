use std::collections::HashMap;

use super::StreetGraph;
use crate::geom::PointXY;

/// Vertices closer than this (per axis, after rounding) are the same point.
pub const SNAP_TOLERANCE_M: f64 = 1e-6;

/// Nodes closer than this are joined into one intersection.
pub const DEFAULT_MERGE_THRESHOLD_M: f64 = 10.0;

type Key = (i64, i64);

fn key(p: PointXY) -> Key {
    (
        (p.x / SNAP_TOLERANCE_M).round() as i64,
        (p.y / SNAP_TOLERANCE_M).round() as i64,
    )
}

/// Builds a street graph from projected polylines. Nodes sit at polyline
/// endpoints and at every vertex that occurs more than once (shared by two
/// polylines or revisited by one). Each run between two nodes becomes an edge
/// carrying its intermediate vertices. A run that returns to its start node
/// has its interior vertices promoted to nodes, so a closed loop becomes a
/// cycle. Duplicate edges keep the first run seen.
pub fn build_graph(polylines: &[Vec<PointXY>]) -> StreetGraph {
    let mut count: HashMap<Key, usize> = HashMap::new();
    for line in polylines {
        for &p in line {
            *count.entry(key(p)).or_default() += 1;
        }
    }

    let mut g = StreetGraph::default();
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut node_at = |g: &mut StreetGraph, p: PointXY| -> usize {
        *index.entry(key(p)).or_insert_with(|| {
            g.nodes.push(p);
            g.nodes.len() - 1
        })
    };

    for line in polylines {
        if line.len() < 2 {
            continue;
        }
        let is_node = |i: usize| i == 0 || i == line.len() - 1 || count[&key(line[i])] > 1;
        let mut start = 0;
        for i in 1..line.len() {
            if !is_node(i) {
                continue;
            }
            let piece = &line[start..=i];
            start = i;
            let u = node_at(&mut g, piece[0]);
            let v = node_at(&mut g, piece[piece.len() - 1]);
            if u != v {
                add_piece(&mut g, u, v, piece);
                continue;
            }
            // A loop: every interior vertex becomes a node.
            let mut prev = u;
            for &p in &piece[1..] {
                let w = node_at(&mut g, p);
                if w != prev {
                    let chord = [g.nodes[prev], g.nodes[w]];
                    add_piece(&mut g, prev, w, &chord);
                }
                prev = w;
            }
        }
    }
    g
}

fn add_piece(g: &mut StreetGraph, u: usize, v: usize, piece: &[PointXY]) {
    let mut geom: Vec<PointXY> = Vec::with_capacity(piece.len());
    geom.push(g.nodes[u]);
    geom.extend_from_slice(&piece[1..piece.len() - 1]);
    geom.push(g.nodes[v]);
    geom.dedup_by_key(|p| key(*p));
    let geometry = (geom.len() > 2).then_some(geom);
    g.add_edge(u, v, geometry)
        .expect("endpoints exist and differ");
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Keep the smaller index as root so group order is stable.
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
        true
    }
}

/// One pass of single-linkage grouping; `None` when nothing is within reach.
fn merge_pass(g: &StreetGraph, threshold: f64) -> Option<StreetGraph> {
    let n = g.nodes.len();
    let mut uf = UnionFind((0..n).collect());
    let cell = |p: PointXY| ((p.x / threshold).floor() as i64, (p.y / threshold).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in g.nodes.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let mut merged = false;
    for (i, &p) in g.nodes.iter().enumerate() {
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j > i && p.distance(g.nodes[j]) < threshold {
                        merged |= uf.union(i, j);
                    }
                }
            }
        }
    }
    if !merged {
        return None;
    }

    let mut group_of = vec![usize::MAX; n];
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for i in 0..n {
        let root = uf.find(i);
        if group_of[root] == usize::MAX {
            group_of[root] = sums.len();
            sums.push((0.0, 0.0, 0));
        }
        group_of[i] = group_of[root];
        let s = &mut sums[group_of[i]];
        s.0 += g.nodes[i].x;
        s.1 += g.nodes[i].y;
        s.2 += 1;
    }
    let mut out = StreetGraph {
        nodes: sums
            .iter()
            .map(|&(x, y, c)| PointXY::new(x / c as f64, y / c as f64))
            .collect(),
        edges: Vec::new(),
        crs: g.crs.clone(),
        normalization: g.normalization,
    };
    for e in &g.edges {
        let (u, v) = (group_of[e.u], group_of[e.v]);
        if u == v {
            continue;
        }
        let geometry = e.geometry.as_ref().map(|geom| {
            let mut geom = geom.clone();
            let last = geom.len() - 1;
            geom[0] = out.nodes[u];
            geom[last] = out.nodes[v];
            geom.dedup();
            geom
        });
        out.add_edge(u, v, geometry).expect("merged endpoints exist and differ");
    }
    Some(out)
}

/// Joins nodes closer than `threshold_m` (single linkage), placing each group
/// at its centroid. Repeats until no two nodes are closer than the threshold,
/// so the result is a fixed point.
pub fn simplify_merge(g: &StreetGraph, threshold_m: f64) -> StreetGraph {
    let mut current = g.clone();
    if !(threshold_m > 0.0) {
        return current;
    }
    while let Some(next) = merge_pass(&current, threshold_m) {
        current = next;
    }
    current
}
