//! Street data ingestion: local extracts (GeoJSON, OSM XML), place filtering,
//! study-box clipping and an optional Overpass client.

mod clip;
mod fetch;
mod geojson;
mod osm;

pub use clip::{clip_box, DEFAULT_HALF_WIDTH_M};
pub use fetch::{fetch_overpass, OverpassQuery, DEFAULT_OVERPASS_URL};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PointGeo;

/// Default population floor: only places with more inhabitants are kept.
pub const DEFAULT_MIN_POPULATION: u64 = 1000;

/// Country code used when a place carries no country tag.
pub const UNKNOWN_COUNTRY: &str = "ZZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceKind {
    Town,
    City,
}

impl PlaceKind {
    pub fn from_tag(v: &str) -> Option<Self> {
        match v {
            "town" => Some(PlaceKind::Town),
            "city" => Some(PlaceKind::City),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceRecord {
    pub id: String,
    pub name: String,
    pub country: String,
    pub place_kind: PlaceKind,
    pub population: Option<u64>,
    pub centroid: PointGeo,
}

/// Highway polylines in geographic coordinates, one tag per polyline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawStreetData {
    pub polylines: Vec<Vec<PointGeo>>,
    pub highway_tags: Vec<String>,
}

impl RawStreetData {
    pub fn len(&self) -> usize {
        self.polylines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    /// Adds a polyline after dropping repeated consecutive vertices. Returns
    /// `false` (and stores nothing) when fewer than two vertices remain.
    pub fn push(&mut self, mut line: Vec<PointGeo>, tag: impl Into<String>) -> bool {
        line.dedup();
        if line.len() < 2 {
            return false;
        }
        self.polylines.push(line);
        self.highway_tags.push(tag.into());
        true
    }

    pub fn extend(&mut self, other: RawStreetData) {
        self.polylines.extend(other.polylines);
        self.highway_tags.extend(other.highway_tags);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractFormat {
    GeoJson,
    OsmXml,
}

impl ExtractFormat {
    /// Guesses the format from a file extension.
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "geojson" | "json" => Some(ExtractFormat::GeoJson),
            "osm" | "xml" => Some(ExtractFormat::OsmXml),
            _ => None,
        }
    }
}

impl FromStr for ExtractFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "geojson" => Ok(ExtractFormat::GeoJson),
            "osm_xml" | "osm" | "xml" => Ok(ExtractFormat::OsmXml),
            other => Err(Error::Usage(format!(
                "unknown extract format `{other}` (expected geojson or osm_xml)"
            ))),
        }
    }
}

impl fmt::Display for ExtractFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractFormat::GeoJson => "geojson",
            ExtractFormat::OsmXml => "osm_xml",
        })
    }
}

/// Parses an extract into highway polylines and `town`/`city` places.
pub fn parse_extract(bytes: &[u8], format: ExtractFormat) -> Result<(RawStreetData, Vec<PlaceRecord>)> {
    match format {
        ExtractFormat::GeoJson => geojson::parse(bytes),
        ExtractFormat::OsmXml => osm::parse(bytes),
    }
}

/// Population tags are free text; anything but plain digits reads as absent.
pub(crate) fn parse_population(raw: &str) -> Option<u64> {
    let s = raw.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Country tags in order of preference.
pub(crate) const COUNTRY_KEYS: [&str; 4] = [
    "ISO3166-1:alpha2",
    "is_in:country_code",
    "country_code",
    "addr:country",
];

pub(crate) fn normalize_country(raw: Option<&str>) -> String {
    match raw.map(str::trim) {
        Some(c) if c.len() == 2 && c.bytes().all(|b| b.is_ascii_alphabetic()) => c.to_ascii_uppercase(),
        _ => UNKNOWN_COUNTRY.to_string(),
    }
}

/// Keeps records whose population is present and strictly above `min_population`.
pub fn filter_places(places: &[PlaceRecord], min_population: u64) -> Vec<PlaceRecord> {
    places
        .iter()
        .filter(|p| p.population.is_some_and(|n| n > min_population))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_tags() {
        assert_eq!(parse_population("1500"), Some(1500));
        assert_eq!(parse_population(" 42 "), Some(42));
        assert_eq!(parse_population("1,500"), None);
        assert_eq!(parse_population("about 300"), None);
        assert_eq!(parse_population("-5"), None);
        assert_eq!(parse_population(""), None);
    }

    #[test]
    fn format_names() {
        assert_eq!("geojson".parse::<ExtractFormat>().unwrap(), ExtractFormat::GeoJson);
        assert_eq!("osm_xml".parse::<ExtractFormat>().unwrap(), ExtractFormat::OsmXml);
        assert!(matches!("shp".parse::<ExtractFormat>(), Err(Error::Usage(_))));
    }

    #[test]
    fn push_drops_repeats_and_stubs() {
        let a = PointGeo { lon: 1.0, lat: 2.0 };
        let b = PointGeo { lon: 1.5, lat: 2.0 };
        let mut d = RawStreetData::default();
        assert!(!d.push(vec![a, a], "residential"));
        assert!(d.push(vec![a, a, b, b], "residential"));
        assert_eq!(d.polylines[0], vec![a, b]);
    }
}
