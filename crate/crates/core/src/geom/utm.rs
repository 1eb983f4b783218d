//! WGS84 to UTM via the Krüger series (fourth order in the third flattening),
//! with the conformal latitude inverted exactly.

use serde::{Deserialize, Serialize};

use super::{PointGeo, PointXY};
use crate::error::{Error, Result};

const A: f64 = 6_378_137.0;
const F: f64 = 1.0 / 298.257_223_563;
const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
const MAX_LAT: f64 = 84.0;

/// A UTM zone number together with its hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtmZone {
    pub number: u8,
    pub north: bool,
}

impl UtmZone {
    /// Zone containing `p`, including the Norway and Svalbard exceptions.
    pub fn containing(p: PointGeo) -> Self {
        let (lon, lat) = (p.lon, p.lat);
        let mut number = (((lon + 180.0) / 6.0).floor() as i32 + 1).clamp(1, 60) as u8;
        if (56.0..64.0).contains(&lat) && (3.0..12.0).contains(&lon) {
            number = 32;
        }
        if (72.0..=84.0).contains(&lat) && lon >= 0.0 {
            number = match lon {
                l if l < 9.0 => 31,
                l if l < 21.0 => 33,
                l if l < 33.0 => 35,
                l if l < 42.0 => 37,
                _ => number,
            };
        }
        Self {
            number,
            north: lat >= 0.0,
        }
    }

    pub fn central_meridian(&self) -> f64 {
        f64::from(self.number) * 6.0 - 183.0
    }

    fn false_northing(&self) -> f64 {
        if self.north {
            0.0
        } else {
            FALSE_NORTHING_SOUTH
        }
    }
}

impl std::fmt::Display for UtmZone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.number, if self.north { 'N' } else { 'S' })
    }
}

struct Series {
    rect_radius: f64,
    alpha: [f64; 4],
    beta: [f64; 4],
    n: f64,
}

fn series() -> Series {
    let n = F / (2.0 - F);
    let (n2, n3, n4) = (n * n, n * n * n, n * n * n * n);
    Series {
        rect_radius: A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0),
        alpha: [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4,
            49561.0 / 161280.0 * n4,
        ],
        beta: [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4,
            1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4,
            4397.0 / 161280.0 * n4,
        ],
        n,
    }
}

/// Projects a geographic point to UTM easting/northing (meters). When `zone`
/// is `None` the zone containing the point is used. Returns the zone so a
/// caller can project the rest of a network into the same frame.
pub fn utm_project(p: PointGeo, zone: Option<UtmZone>) -> Result<(PointXY, UtmZone)> {
    if !(p.lat.abs() <= MAX_LAT) {
        return Err(Error::Projection(format!(
            "latitude {} outside the UTM band [-84, 84]",
            p.lat
        )));
    }
    let zone = zone.unwrap_or_else(|| UtmZone::containing(p));
    let s = series();
    let phi = p.lat.to_radians();
    let dlambda = (p.lon - zone.central_meridian()).to_radians();

    let c = 2.0 * s.n.sqrt() / (1.0 + s.n);
    let t = (phi.sin().atanh() - c * (c * phi.sin()).atanh()).sinh();
    let xi_p = t.atan2(dlambda.cos());
    let eta_p = (dlambda.sin() / (1.0 + t * t).sqrt()).atanh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    let easting = FALSE_EASTING + K0 * s.rect_radius * eta;
    let northing = zone.false_northing() + K0 * s.rect_radius * xi;
    Ok((PointXY::new(easting, northing), zone))
}

/// Inverts the conformal latitude exactly: given `tan(chi)`, returns
/// `tan(phi)` by Newton iteration (a few steps reach machine precision).
fn geodetic_from_conformal(tau_p: f64) -> f64 {
    let e2 = F * (2.0 - F);
    let e = e2.sqrt();
    let mut tau = tau_p / (1.0 - e2);
    for _ in 0..8 {
        let tau1 = tau.hypot(1.0);
        let sigma = (e * (e * tau / tau1).atanh()).sinh();
        let tau_i = tau * sigma.hypot(1.0) - sigma * tau1;
        let dtau = (tau_p - tau_i) / tau_i.hypot(1.0) * (1.0 + (1.0 - e2) * tau * tau)
            / ((1.0 - e2) * tau1);
        tau += dtau;
        if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
            break;
        }
    }
    tau
}

/// Inverse of [`utm_project`] for a known zone.
pub fn utm_unproject(p: PointXY, zone: UtmZone) -> Result<PointGeo> {
    let s = series();
    let xi = (p.y - zone.false_northing()) / (K0 * s.rect_radius);
    let eta = (p.x - FALSE_EASTING) / (K0 * s.rect_radius);
    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let tau_p = xi_p.sin() / (eta_p.sinh().powi(2) + xi_p.cos().powi(2)).sqrt();
    let phi = geodetic_from_conformal(tau_p).atan();
    let lambda = eta_p.sinh().atan2(xi_p.cos());
    let lon = zone.central_meridian() + lambda.to_degrees();
    let lat = phi.to_degrees();
    if !lon.is_finite() || !lat.is_finite() {
        return Err(Error::Projection(format!(
            "cannot invert ({}, {}) in zone {zone}",
            p.x, p.y
        )));
    }
    Ok(PointGeo { lon, lat })
}
