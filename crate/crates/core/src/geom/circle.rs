use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PointXY;
use crate::error::{Error, Result};

const SHUFFLE_SEED: u64 = 0x5eed_c1c1e;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: PointXY,
    pub radius: f64,
}

impl Circle {
    fn from_two(a: PointXY, b: PointXY) -> Self {
        let center = PointXY::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
        Circle {
            center,
            radius: center.distance(a).max(center.distance(b)),
        }
    }

    /// Circumcircle, or the diametral circle of the farthest pair when the
    /// three points are collinear.
    fn from_three(a: PointXY, b: PointXY, c: PointXY) -> Self {
        let (bx, by) = (b.x - a.x, b.y - a.y);
        let (cx, cy) = (c.x - a.x, c.y - a.y);
        let d = 2.0 * (bx * cy - by * cx);
        let scale = (bx * bx + by * by).max(cx * cx + cy * cy);
        if d.abs() <= 1e-14 * scale {
            let candidates = [Self::from_two(a, b), Self::from_two(a, c), Self::from_two(b, c)];
            return candidates
                .into_iter()
                .max_by(|p, q| p.radius.total_cmp(&q.radius))
                .unwrap();
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = PointXY::new(a.x + ux, a.y + uy);
        let radius = center
            .distance(a)
            .max(center.distance(b))
            .max(center.distance(c));
        Circle { center, radius }
    }

    pub fn contains(&self, p: PointXY) -> bool {
        self.center.distance(p) <= self.radius * (1.0 + 1e-12) + 1e-12
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// Smallest circle enclosing every point (Welzl's algorithm in its iterative
/// form, on a deterministically shuffled copy of the input).
pub fn min_enclosing_circle(points: &[PointXY]) -> Result<Circle> {
    if points.is_empty() {
        return Err(Error::Argument("enclosing circle of an empty set".into()));
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(SHUFFLE_SEED));

    let mut circle = Circle {
        center: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if circle.contains(pts[i]) {
            continue;
        }
        circle = Circle {
            center: pts[i],
            radius: 0.0,
        };
        for j in 0..i {
            if circle.contains(pts[j]) {
                continue;
            }
            circle = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !circle.contains(pts[k]) {
                    circle = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Ok(circle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> PointXY {
        PointXY::new(x, y)
    }

    /// Minimal circle over all pair and triple candidates that enclose the set.
    fn brute_force(points: &[PointXY]) -> f64 {
        let n = points.len();
        if n == 1 {
            return 0.0;
        }
        let encloses = |c: &Circle| points.iter().all(|&q| c.center.distance(q) <= c.radius + 1e-9);
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let c = Circle::from_two(points[i], points[j]);
                if encloses(&c) {
                    best = best.min(c.radius);
                }
                for k in j + 1..n {
                    let c = Circle::from_three(points[i], points[j], points[k]);
                    if encloses(&c) {
                        best = best.min(c.radius);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn two_points() {
        let c = min_enclosing_circle(&[p(0.0, 0.0), p(2.0, 0.0)]).unwrap();
        assert_eq!(c.center, p(1.0, 0.0));
        assert_eq!(c.radius, 1.0);
    }

    #[test]
    fn equilateral_triangle() {
        let tri = [p(0.0, 0.0), p(1.0, 0.0), p(0.5, 3f64.sqrt() / 2.0)];
        let c = min_enclosing_circle(&tri).unwrap();
        assert!((c.radius - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((c.radius - brute_force(&tri)).abs() < 1e-12);
    }

    #[test]
    fn single_point_and_empty() {
        let c = min_enclosing_circle(&[p(4.0, 5.0)]).unwrap();
        assert_eq!((c.center, c.radius), (p(4.0, 5.0), 0.0));
        assert!(min_enclosing_circle(&[]).is_err());
    }

    #[test]
    fn obtuse_triangle_uses_longest_side() {
        let c = min_enclosing_circle(&[p(0.0, 0.0), p(10.0, 0.0), p(5.0, 1.0)]).unwrap();
        assert!((c.radius - 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_brute_force(pts in prop::collection::vec((-100f64..100.0, -100f64..100.0), 1..=12)) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| p(x, y)).collect();
            let c = min_enclosing_circle(&pts).unwrap();
            for q in &pts {
                prop_assert!(c.center.distance(*q) <= c.radius + 1e-9);
            }
            let oracle = brute_force(&pts);
            prop_assert!((c.radius - oracle).abs() <= 1e-7 * (1.0 + oracle), "{} vs {}", c.radius, oracle);
        }
    }
}
