use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{normalize_country, parse_population, PlaceKind, PlaceRecord, RawStreetData, COUNTRY_KEYS};
use crate::error::{Error, Result};
use crate::geom::PointGeo;

enum Element {
    Node { id: i64, point: PointGeo, tags: Vec<(String, String)> },
    Way { refs: Vec<i64>, tags: Vec<(String, String)> },
    Other,
}

fn parse_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        offset: offset as usize,
        message: message.into(),
    }
}

fn attrs(e: &BytesStart, offset: u64) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| parse_err(offset, err.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| parse_err(offset, err.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn required<T: std::str::FromStr>(a: &HashMap<String, String>, key: &str, what: &str, offset: u64) -> Result<T> {
    a.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(offset, format!("{what} without a valid `{key}` attribute")))
}

fn tag<'a>(tags: &'a [(String, String)], key: &str) -> Option<&'a str> {
    tags.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn open(e: &BytesStart, offset: u64, current: &mut Element, nodes: &mut HashMap<i64, PointGeo>) -> Result<()> {
    match e.name().as_ref() {
        b"node" => {
            let a = attrs(e, offset)?;
            let id = required(&a, "id", "node", offset)?;
            let lat: f64 = required(&a, "lat", "node", offset)?;
            let lon: f64 = required(&a, "lon", "node", offset)?;
            let point = PointGeo::new(lon, lat).map_err(|err| parse_err(offset, err.to_string()))?;
            nodes.insert(id, point);
            *current = Element::Node {
                id,
                point,
                tags: Vec::new(),
            };
        }
        b"way" => {
            *current = Element::Way {
                refs: Vec::new(),
                tags: Vec::new(),
            };
        }
        b"nd" => {
            if let Element::Way { refs, .. } = current {
                refs.push(required(&attrs(e, offset)?, "ref", "nd", offset)?);
            }
        }
        b"tag" => {
            let a = attrs(e, offset)?;
            if let (Some(k), Some(v)) = (a.get("k"), a.get("v")) {
                if let Element::Node { tags, .. } | Element::Way { tags, .. } = current {
                    tags.push((k.clone(), v.clone()));
                }
            }
        }
        _ => {}
    }
    Ok(())
}

pub(super) fn parse(bytes: &[u8]) -> Result<(RawStreetData, Vec<PlaceRecord>)> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);

    let mut nodes: HashMap<i64, PointGeo> = HashMap::new();
    let mut ways: Vec<(Vec<i64>, Vec<(String, String)>)> = Vec::new();
    let mut places = Vec::new();
    let mut current = Element::Other;

    loop {
        let offset = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| parse_err(reader.error_position(), e.to_string()))?;
        let closes = match &event {
            Event::Start(e) | Event::Empty(e) => {
                open(e, offset, &mut current, &mut nodes)?;
                matches!(event, Event::Empty(_)) && matches!(e.name().as_ref(), b"node" | b"way")
            }
            Event::End(e) => matches!(e.name().as_ref(), b"node" | b"way"),
            Event::Eof => break,
            _ => false,
        };
        if !closes {
            continue;
        }
        match std::mem::replace(&mut current, Element::Other) {
            Element::Node { id, point, tags } => {
                if let Some(kind) = tag(&tags, "place").and_then(PlaceKind::from_tag) {
                    places.push(PlaceRecord {
                        id: id.to_string(),
                        name: tag(&tags, "name").unwrap_or_default().to_string(),
                        country: normalize_country(COUNTRY_KEYS.iter().find_map(|k| tag(&tags, k))),
                        place_kind: kind,
                        population: tag(&tags, "population").and_then(parse_population),
                        centroid: point,
                    });
                }
            }
            Element::Way { refs, tags } => ways.push((refs, tags)),
            Element::Other => {}
        }
    }

    let mut streets = RawStreetData::default();
    for (refs, tags) in ways {
        let Some(highway) = tag(&tags, "highway") else {
            continue;
        };
        // Ways may reference nodes outside the extract; split at the gaps
        // rather than joining across them.
        let mut run = Vec::new();
        for r in refs {
            match nodes.get(&r) {
                Some(p) => run.push(*p),
                None => {
                    streets.push(std::mem::take(&mut run), highway);
                }
            }
        }
        streets.push(run, highway);
    }
    Ok((streets, places))
}
