use serde::Deserialize;
use serde_json::value::RawValue;
use serde_json::{Map, Value};

use super::{normalize_country, parse_population, PlaceKind, PlaceRecord, RawStreetData, COUNTRY_KEYS};
use crate::error::{Error, Result};
use crate::geom::PointGeo;

#[derive(Deserialize)]
struct Collection<'a> {
    #[serde(rename = "type")]
    kind: String,
    #[serde(borrow)]
    features: Vec<&'a RawValue>,
}

#[derive(Deserialize)]
struct Feature {
    id: Option<Value>,
    geometry: Option<Geometry>,
    #[serde(default)]
    properties: Option<Map<String, Value>>,
}

#[derive(Deserialize)]
#[serde(tag = "type")]
enum Geometry {
    Point { coordinates: Vec<f64> },
    LineString { coordinates: Vec<Vec<f64>> },
    MultiLineString { coordinates: Vec<Vec<Vec<f64>>> },
    #[serde(other)]
    Other,
}

/// Byte offset of a (line, column) position reported by serde_json.
fn offset_of(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn json_error(text: &str, base: usize, e: &serde_json::Error) -> Error {
    Error::Parse {
        offset: base + offset_of(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

fn point(raw: &[f64], offset: usize) -> Result<PointGeo> {
    match raw {
        [lon, lat, ..] => PointGeo::new(*lon, *lat).map_err(|e| Error::Parse {
            offset,
            message: e.to_string(),
        }),
        _ => Err(Error::Parse {
            offset,
            message: "position needs at least two numbers".into(),
        }),
    }
}

fn line(raw: &[Vec<f64>], offset: usize) -> Result<Vec<PointGeo>> {
    raw.iter().map(|p| point(p, offset)).collect()
}

fn tag_str<'a>(props: &'a Map<String, Value>, key: &str) -> Option<&'a str> {
    props.get(key).and_then(Value::as_str)
}

fn value_to_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

pub(super) fn parse(bytes: &[u8]) -> Result<(RawStreetData, Vec<PlaceRecord>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "document is not valid UTF-8".into(),
    })?;
    let collection: Collection = serde_json::from_str(text).map_err(|e| json_error(text, 0, &e))?;
    if collection.kind != "FeatureCollection" {
        return Err(Error::Parse {
            offset: 0,
            message: format!("expected a FeatureCollection, found `{}`", collection.kind),
        });
    }

    let mut streets = RawStreetData::default();
    let mut places = Vec::new();
    for (index, raw) in collection.features.iter().enumerate() {
        // RawValue borrows from `text`, so the pointer difference is the offset.
        let base = raw.get().as_ptr() as usize - text.as_ptr() as usize;
        let feature: Feature = serde_json::from_str(raw.get()).map_err(|e| json_error(raw.get(), base, &e))?;
        let props = feature.properties.unwrap_or_default();
        let Some(geometry) = feature.geometry else {
            continue;
        };
        match geometry {
            Geometry::LineString { coordinates } => {
                if let Some(tag) = tag_str(&props, "highway") {
                    streets.push(line(&coordinates, base)?, tag);
                }
            }
            Geometry::MultiLineString { coordinates } => {
                if let Some(tag) = tag_str(&props, "highway") {
                    for part in &coordinates {
                        streets.push(line(part, base)?, tag);
                    }
                }
            }
            Geometry::Point { coordinates } => {
                let Some(kind) = tag_str(&props, "place").and_then(PlaceKind::from_tag) else {
                    continue;
                };
                let id = feature
                    .id
                    .as_ref()
                    .and_then(value_to_id)
                    .or_else(|| props.get("@id").and_then(value_to_id))
                    .unwrap_or_else(|| format!("feature-{index}"));
                let population = match props.get("population") {
                    Some(Value::String(s)) => parse_population(s),
                    Some(Value::Number(n)) => n.as_u64(),
                    _ => None,
                };
                let country = COUNTRY_KEYS.iter().find_map(|k| tag_str(&props, k));
                places.push(PlaceRecord {
                    id,
                    name: tag_str(&props, "name").unwrap_or_default().to_string(),
                    country: normalize_country(country),
                    place_kind: kind,
                    population,
                    centroid: point(&coordinates, base)?,
                });
            }
            Geometry::Other => {}
        }
    }
    Ok((streets, places))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_count_bytes() {
        let text = "ab\ncde\nf";
        assert_eq!(offset_of(text, 1, 1), 0);
        assert_eq!(offset_of(text, 2, 2), 4);
        assert_eq!(offset_of(text, 3, 1), 7);
    }
}
