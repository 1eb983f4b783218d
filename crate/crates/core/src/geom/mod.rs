//! Planar geometry primitives shared by graph construction and block metrics.
//!
//! Coordinates live in one of three frames: geographic (`PointGeo`, WGS84
//! degrees), projected meters (`PointXY` after UTM), and the normalized unit
//! frame (`PointXY` centered at the origin with a unit bounding-box diagonal).

mod circle;
mod utm;

pub use circle::{min_enclosing_circle, Circle};
pub use utm::{utm_project, utm_unproject, UtmZone};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of quantization bins per axis (8 bits).
pub const QUANT_BINS: u32 = 256;

/// A WGS84 longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointGeo {
    pub lon: f64,
    pub lat: f64,
}

impl PointGeo {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Argument(format!(
                "coordinate ({lon}, {lat}) outside WGS84 range"
            )));
        }
        Ok(Self { lon, lat })
    }
}

/// A planar point, in meters or in the normalized frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointXY {
    pub x: f64,
    pub y: f64,
}

impl PointXY {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: PointXY) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// An 8-bit quantized coordinate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuantizedPoint {
    pub qx: u8,
    pub qy: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: PointXY,
    pub max: PointXY,
}

impl BBox {
    /// Bounding box of a point set; `None` when empty.
    pub fn of(points: &[PointXY]) -> Option<Self> {
        let first = *points.first()?;
        let mut bb = BBox {
            min: first,
            max: first,
        };
        for p in &points[1..] {
            bb.min.x = bb.min.x.min(p.x);
            bb.min.y = bb.min.y.min(p.y);
            bb.max.x = bb.max.x.max(p.x);
            bb.max.y = bb.max.y.max(p.y);
        }
        Some(bb)
    }

    pub fn center(&self) -> PointXY {
        PointXY::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn diagonal(&self) -> f64 {
        (self.max.x - self.min.x).hypot(self.max.y - self.min.y)
    }
}

/// The affine map taking metric coordinates into the normalized frame:
/// `normalized = (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub center: [f64; 2],
    pub scale: f64,
}

impl NormalizationRecord {
    pub const IDENTITY: NormalizationRecord = NormalizationRecord {
        center: [0.0, 0.0],
        scale: 1.0,
    };

    pub fn apply(&self, p: PointXY) -> PointXY {
        PointXY::new(
            (p.x - self.center[0]) * self.scale,
            (p.y - self.center[1]) * self.scale,
        )
    }

    pub fn invert(&self, p: PointXY) -> PointXY {
        PointXY::new(
            p.x / self.scale + self.center[0],
            p.y / self.scale + self.center[1],
        )
    }
}

impl Default for NormalizationRecord {
    fn default() -> Self {
        NormalizationRecord::IDENTITY
    }
}

/// Centers a point set on its bounding-box center and scales it so the
/// bounding-box diagonal is 1.
pub fn center_and_normalize(points: &[PointXY]) -> Result<(Vec<PointXY>, NormalizationRecord)> {
    let bb = BBox::of(points).ok_or(Error::DegenerateExtent)?;
    let diag = bb.diagonal();
    if !(diag > 0.0) {
        return Err(Error::DegenerateExtent);
    }
    let c = bb.center();
    let record = NormalizationRecord {
        center: [c.x, c.y],
        scale: 1.0 / diag,
    };
    Ok((points.iter().map(|&p| record.apply(p)).collect(), record))
}

fn quantize_axis(v: f64) -> u8 {
    let bin = ((v + 0.5) * f64::from(QUANT_BINS)).floor();
    bin.clamp(0.0, f64::from(QUANT_BINS - 1)) as u8
}

fn dequantize_axis(q: u8) -> f64 {
    (f64::from(q) + 0.5) / f64::from(QUANT_BINS) - 0.5
}

/// Uniform 8-bit quantization of a normalized point; values outside
/// `[-0.5, 0.5]` are clamped to the edge bins.
pub fn quantize(p: PointXY) -> QuantizedPoint {
    QuantizedPoint {
        qx: quantize_axis(p.x),
        qy: quantize_axis(p.y),
    }
}

/// Returns the bin center.
pub fn dequantize(q: QuantizedPoint) -> PointXY {
    PointXY::new(dequantize_axis(q.qx), dequantize_axis(q.qy))
}

pub fn polyline_length(vertices: &[PointXY]) -> Result<f64> {
    if vertices.len() < 2 {
        return Err(Error::Argument(format!(
            "polyline needs at least 2 vertices, got {}",
            vertices.len()
        )));
    }
    Ok(vertices.windows(2).map(|w| w[0].distance(w[1])).sum())
}

/// Compass bearing from `a` to `b` in degrees: 0 is +y (north), 90 is +x (east).
pub fn bearing(a: PointXY, b: PointXY) -> Result<f64> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Argument("bearing between identical points".into()));
    }
    let deg = dx.atan2(dy).to_degrees();
    let deg = if deg < 0.0 { deg + 360.0 } else { deg };
    // atan2 can return exactly -0.0 or round up to 360.0
    Ok(if deg >= 360.0 { 0.0 } else { deg.abs() })
}

fn open_ring(ring: &[PointXY]) -> &[PointXY] {
    match ring {
        [first, .., last] if ring.len() > 1 && first == last => &ring[..ring.len() - 1],
        _ => ring,
    }
}

/// Signed shoelace area; positive for counter-clockwise rings. The ring may
/// be explicitly closed or not.
pub fn signed_area(ring: &[PointXY]) -> f64 {
    let pts = open_ring(ring);
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        twice += p.x * q.y - q.x * p.y;
    }
    0.5 * twice
}

/// Absolute area and perimeter of a ring (explicitly or implicitly closed).
pub fn polygon_area_perimeter(ring: &[PointXY]) -> Result<(f64, f64)> {
    let pts = open_ring(ring);
    if pts.len() < 3 {
        return Err(Error::Argument(format!(
            "polygon needs at least 3 vertices, got {}",
            pts.len()
        )));
    }
    let mut closed = pts.to_vec();
    closed.push(pts[0]);
    Ok((signed_area(pts).abs(), polyline_length(&closed)?))
}
