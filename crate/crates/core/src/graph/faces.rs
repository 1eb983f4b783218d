use std::f64::consts::PI;

use super::StreetGraph;
use crate::error::{Error, Result};
use crate::geom::{signed_area, PointXY};

/// A closed face walk. Interior faces run counter-clockwise (positive area).
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub ring: Vec<usize>,
    pub is_outer: bool,
    /// Signed area of the straight-line ring.
    pub signed_area: f64,
}

fn orient(a: PointXY, b: PointXY, c: PointXY) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: PointXY, b: PointXY, p: PointXY) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
fn segments_meet(a: PointXY, b: PointXY, c: PointXY, d: PointXY) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// The first pair of straight edges that cross, touch away from a shared
/// node, or overlap along a shared node's direction.
pub fn find_crossing(g: &StreetGraph) -> Option<((usize, usize), (usize, usize))> {
    let boxes: Vec<(PointXY, PointXY)> = g
        .edges
        .iter()
        .map(|e| {
            let (a, b) = (g.nodes[e.u], g.nodes[e.v]);
            (
                PointXY::new(a.x.min(b.x), a.y.min(b.y)),
                PointXY::new(a.x.max(b.x), a.y.max(b.y)),
            )
        })
        .collect();
    for (i, e) in g.edges.iter().enumerate() {
        let (a, b) = (g.nodes[e.u], g.nodes[e.v]);
        for (j, f) in g.edges.iter().enumerate().skip(i + 1) {
            let (lo, hi) = boxes[j];
            if hi.x < boxes[i].0.x || lo.x > boxes[i].1.x || hi.y < boxes[i].0.y || lo.y > boxes[i].1.y {
                continue;
            }
            let (c, d) = (g.nodes[f.u], g.nodes[f.v]);
            let shared = [e.u, e.v].iter().find(|n| **n == f.u || **n == f.v).copied();
            let hit = match shared {
                None => segments_meet(a, b, c, d),
                Some(s) => {
                    // Adjacent edges only conflict when they overlap.
                    let p = g.nodes[s];
                    let x = if e.u == s { b } else { a };
                    let y = if f.u == s { d } else { c };
                    orient(p, x, y) == 0.0 && (x.x - p.x) * (y.x - p.x) + (x.y - p.y) * (y.y - p.y) > 0.0
                }
            };
            if hit {
                return Some(((e.u, e.v), (f.u, f.v)));
            }
        }
    }
    None
}

/// Faces of the straight-line embedding, by the rotation system: outgoing
/// edges are sorted counter-clockwise around each node and a walk continues
/// from `u -> v` along the clockwise successor of `v -> u` at `v`. Interior
/// faces come out counter-clockwise; the clockwise face with the largest
/// absolute area is marked outer.
pub fn extract_faces(g: &StreetGraph) -> Result<Vec<Face>> {
    if let Some((first, second)) = find_crossing(g) {
        return Err(Error::NonPlanar { first, second });
    }
    let n = g.num_nodes();
    if g.edges.is_empty() {
        return Ok(if n == 0 {
            Vec::new()
        } else {
            vec![Face {
                ring: Vec::new(),
                is_outer: true,
                signed_area: 0.0,
            }]
        });
    }

    let mut rotation = g.neighbors();
    for (u, nbrs) in rotation.iter_mut().enumerate() {
        let p = g.nodes[u];
        let angle = |w: &usize| {
            let q = g.nodes[*w];
            let a = (q.y - p.y).atan2(q.x - p.x);
            if a < 0.0 {
                a + 2.0 * PI
            } else {
                a
            }
        };
        nbrs.sort_by(|a, b| angle(a).total_cmp(&angle(b)).then(a.cmp(b)));
    }
    // Position of each half-edge u -> rotation[u][k], indexed by u.
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(rotation.iter().scan(0, |acc, r| {
            *acc += r.len();
            Some(*acc)
        }))
        .collect();
    let slot_of = |u: usize, w: usize| -> usize {
        offsets[u] + rotation[u].iter().position(|&x| x == w).expect("edge is in the rotation")
    };

    let mut used = vec![false; offsets[n]];
    let mut faces = Vec::new();
    for u0 in 0..n {
        for k0 in 0..rotation[u0].len() {
            if used[offsets[u0] + k0] {
                continue;
            }
            let mut ring = Vec::new();
            let (mut u, mut v) = (u0, rotation[u0][k0]);
            loop {
                used[slot_of(u, v)] = true;
                ring.push(u);
                let back = rotation[v].iter().position(|&x| x == u).expect("undirected");
                let deg = rotation[v].len();
                let w = rotation[v][(back + deg - 1) % deg];
                u = v;
                v = w;
                if used[slot_of(u, v)] {
                    break;
                }
            }
            let pts: Vec<PointXY> = ring.iter().map(|&i| g.nodes[i]).collect();
            faces.push(Face {
                signed_area: signed_area(&pts),
                ring,
                is_outer: false,
            });
        }
    }
    // The outer walk is clockwise, so restricting to non-positive areas
    // breaks the tie with the single interior face of a simple cycle.
    let outer = faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.signed_area <= 0.0)
        .max_by(|a, b| a.1.signed_area.abs().total_cmp(&b.1.signed_area.abs()).then(b.0.cmp(&a.0)))
        .or_else(|| {
            faces
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.signed_area.abs().total_cmp(&b.1.signed_area.abs()))
        })
        .map(|(i, _)| i)
        .expect("at least one face");
    faces[outer].is_outer = true;
    Ok(faces)
}

/// The face boundary with each edge's polyline substituted for its chord.
pub fn face_polygon(g: &StreetGraph, face: &Face) -> Vec<PointXY> {
    let mut lookup = std::collections::HashMap::new();
    for e in &g.edges {
        lookup.insert((e.u, e.v), e);
    }
    let mut out = Vec::new();
    let k = face.ring.len();
    for i in 0..k {
        let (a, b) = (face.ring[i], face.ring[(i + 1) % k]);
        let e = lookup[&(a.min(b), a.max(b))];
        let mut line = g.edge_polyline(e);
        if a > b {
            line.reverse();
        }
        out.extend_from_slice(&line[..line.len() - 1]);
    }
    out
}
