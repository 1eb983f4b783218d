use super::RawStreetData;
use crate::error::{Error, Result};
use crate::geom::{utm_project, utm_unproject, PointGeo, PointXY, UtmZone};

/// Half the side of the study box: a 1 km square around the place centroid.
pub const DEFAULT_HALF_WIDTH_M: f64 = 500.0;

/// Vertices this far outside the box still count as inside. It absorbs the
/// projection round trip of boundary vertices so clipping is idempotent.
const INSIDE_TOL_M: f64 = 1e-6;

struct Window {
    min: PointXY,
    max: PointXY,
}

impl Window {
    fn contains(&self, p: PointXY) -> bool {
        p.x >= self.min.x - INSIDE_TOL_M
            && p.x <= self.max.x + INSIDE_TOL_M
            && p.y >= self.min.y - INSIDE_TOL_M
            && p.y <= self.max.y + INSIDE_TOL_M
    }

    /// Liang–Barsky: the parameter interval of `a + t (b - a)` inside the box.
    fn clip(&self, a: PointXY, b: PointXY) -> Option<(f64, f64)> {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for (p, q) in [
            (-dx, a.x - self.min.x),
            (dx, self.max.x - a.x),
            (-dy, a.y - self.min.y),
            (dy, self.max.y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
                continue;
            }
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

fn lerp(a: PointXY, b: PointXY, t: f64) -> PointXY {
    PointXY::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
}

/// Clips every polyline to the axis-aligned square of side `2 * half_width_m`
/// centered on `centroid`, measured in the centroid's UTM zone. Crossing
/// polylines are cut at the border; a polyline that leaves and re-enters the
/// box becomes several polylines with the same tag.
pub fn clip_box(data: &RawStreetData, centroid: PointGeo, half_width_m: f64) -> Result<RawStreetData> {
    if !(half_width_m > 0.0) || !half_width_m.is_finite() {
        return Err(Error::Argument(format!(
            "box half-width must be positive, got {half_width_m}"
        )));
    }
    let zone = UtmZone::containing(centroid);
    let (c, _) = utm_project(centroid, Some(zone))?;
    let window = Window {
        min: PointXY::new(c.x - half_width_m, c.y - half_width_m),
        max: PointXY::new(c.x + half_width_m, c.y + half_width_m),
    };

    let mut out = RawStreetData::default();
    for (line, tag) in data.polylines.iter().zip(&data.highway_tags) {
        let projected = line
            .iter()
            .map(|&g| utm_project(g, Some(zone)).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        let mut run: Vec<PointGeo> = Vec::new();
        for i in 0..line.len().saturating_sub(1) {
            let (a, b) = (projected[i], projected[i + 1]);
            let (in_a, in_b) = (window.contains(a), window.contains(b));
            let span = if in_a && in_b {
                Some((0.0, 1.0))
            } else {
                window
                    .clip(a, b)
                    .map(|(t0, t1)| (if in_a { 0.0 } else { t0 }, if in_b { 1.0 } else { t1 }))
            };
            let Some((t0, t1)) = span else {
                out.push(std::mem::take(&mut run), tag.as_str());
                continue;
            };
            let start = if t0 == 0.0 {
                line[i]
            } else {
                out.push(std::mem::take(&mut run), tag.as_str());
                utm_unproject(lerp(a, b, t0), zone)?
            };
            if run.last() != Some(&start) {
                run.push(start);
            }
            if t1 == 1.0 {
                run.push(line[i + 1]);
            } else {
                run.push(utm_unproject(lerp(a, b, t1), zone)?);
                out.push(std::mem::take(&mut run), tag.as_str());
            }
        }
        out.push(run, tag.as_str());
    }
    Ok(out)
}
