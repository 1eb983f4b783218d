use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use proptest::prelude::*;
use streetvae::geom::{utm_project, utm_unproject, PointGeo, PointXY, UtmZone};
use streetvae::ingest::{
    clip_box, fetch_overpass, filter_places, parse_extract, ExtractFormat, OverpassQuery, PlaceKind, PlaceRecord,
    RawStreetData,
};
use streetvae::Error;

fn line_feature(highway: Option<&str>, coords: &[(f64, f64)]) -> String {
    let props = match highway {
        Some(h) => format!(r#"{{"highway":"{h}"}}"#),
        None => r#"{"building":"yes"}"#.to_string(),
    };
    let cs: Vec<String> = coords.iter().map(|(x, y)| format!("[{x},{y}]")).collect();
    format!(
        r#"{{"type":"Feature","properties":{props},"geometry":{{"type":"LineString","coordinates":[{}]}}}}"#,
        cs.join(",")
    )
}

fn collection(features: &[String]) -> String {
    format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, features.join(",\n"))
}

#[test]
fn geojson_single_highway_passthrough() {
    let doc = collection(&[line_feature(Some("residential"), &[(2.0, 48.0), (2.001, 48.0), (2.001, 48.001)])]);
    let (streets, places) = parse_extract(doc.as_bytes(), ExtractFormat::GeoJson).unwrap();
    assert_eq!(streets.polylines.len(), 1);
    assert_eq!(streets.polylines[0].len(), 3);
    assert_eq!(streets.highway_tags, vec!["residential"]);
    assert!(places.is_empty());
}

#[test]
fn geojson_place_with_population() {
    let doc = collection(&[r#"{"type":"Feature","id":"node/7","properties":{"place":"town","name":"Testville","population":"1500","addr:country":"fr"},"geometry":{"type":"Point","coordinates":[2.35,48.85]}}"#.to_string()]);
    let (_, places) = parse_extract(doc.as_bytes(), ExtractFormat::GeoJson).unwrap();
    assert_eq!(places.len(), 1);
    let p = &places[0];
    assert_eq!(p.population, Some(1500));
    assert_eq!(p.place_kind, PlaceKind::Town);
    assert_eq!(p.id, "node/7");
    assert_eq!(p.country, "FR");
    assert_eq!((p.centroid.lon, p.centroid.lat), (2.35, 48.85));
}

#[test]
fn geojson_keeps_only_highways() {
    let doc = collection(&[
        line_feature(Some("primary"), &[(0.0, 0.0), (0.001, 0.0)]),
        line_feature(None, &[(0.0, 0.0), (0.0, 0.001)]),
        line_feature(Some("service"), &[(0.001, 0.0), (0.001, 0.001)]),
    ]);
    let (streets, _) = parse_extract(doc.as_bytes(), ExtractFormat::GeoJson).unwrap();
    assert_eq!(streets.polylines.len(), 2);
    assert_eq!(streets.highway_tags, vec!["primary", "service"]);
}

#[test]
fn geojson_thousands_separator_is_absent_population() {
    let doc = collection(&[r#"{"type":"Feature","properties":{"place":"city","population":"12,000"},"geometry":{"type":"Point","coordinates":[0,0]}}"#.to_string()]);
    let (_, places) = parse_extract(doc.as_bytes(), ExtractFormat::GeoJson).unwrap();
    assert_eq!(places[0].population, None);
    assert_eq!(places[0].country, "ZZ");
}

#[test]
fn geojson_errors_carry_byte_offsets() {
    let good = line_feature(Some("residential"), &[(0.0, 0.0), (0.001, 0.0)]);
    let bad = r#"{"type":"Feature","properties":{"highway":"x"},"geometry":{"type":"LineString","coordinates":[[0,0],[1,"a"]]}}"#;
    let doc = collection(&[good, bad.to_string()]);
    let feature_start = doc.find(bad).unwrap();
    match parse_extract(doc.as_bytes(), ExtractFormat::GeoJson) {
        Err(Error::Parse { offset, .. }) => {
            assert!(offset >= feature_start && offset <= feature_start + bad.len(), "{offset}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }

    let truncated = r#"{"type":"FeatureCollection","features":[{"type":"#;
    match parse_extract(truncated.as_bytes(), ExtractFormat::GeoJson) {
        Err(Error::Parse { offset, .. }) => assert!(offset <= truncated.len()),
        other => panic!("expected parse error, got {other:?}"),
    }

    let out_of_range = collection(&[line_feature(Some("x"), &[(0.0, 0.0), (0.0, 95.0)])]);
    assert!(matches!(
        parse_extract(out_of_range.as_bytes(), ExtractFormat::GeoJson),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn geojson_multilinestring_splits() {
    let doc = collection(&[r#"{"type":"Feature","properties":{"highway":"tertiary"},"geometry":{"type":"MultiLineString","coordinates":[[[0,0],[0.001,0]],[[1,1],[1,1.001],[1,1.002]]]}}"#.to_string()]);
    let (streets, _) = parse_extract(doc.as_bytes(), ExtractFormat::GeoJson).unwrap();
    assert_eq!(streets.polylines.len(), 2);
    assert_eq!(streets.polylines[1].len(), 3);
}

const OSM: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6">
  <node id="1" lat="48.0" lon="2.0"/>
  <node id="2" lat="48.001" lon="2.0"/>
  <node id="3" lat="48.001" lon="2.001"/>
  <node id="4" lat="48.0" lon="2.001">
    <tag k="place" v="city"/>
    <tag k="name" v="Ville &amp; Co"/>
    <tag k="population" v="25000"/>
    <tag k="is_in:country_code" v="FR"/>
  </node>
  <node id="5" lat="48.002" lon="2.002">
    <tag k="place" v="village"/>
  </node>
  <way id="10">
    <nd ref="1"/><nd ref="2"/><nd ref="3"/>
    <tag k="highway" v="residential"/>
  </way>
  <way id="11">
    <nd ref="1"/><nd ref="4"/>
    <tag k="building" v="yes"/>
  </way>
  <way id="12">
    <nd ref="3"/><nd ref="4"/><nd ref="99"/><nd ref="1"/><nd ref="2"/>
    <tag k="highway" v="primary"/>
  </way>
</osm>
"#;

#[test]
fn osm_xml_highways_and_places() {
    let (streets, places) = parse_extract(OSM.as_bytes(), ExtractFormat::OsmXml).unwrap();
    // way 10, plus way 12 split around the missing node 99
    assert_eq!(streets.polylines.len(), 3);
    assert_eq!(streets.highway_tags, vec!["residential", "primary", "primary"]);
    assert_eq!(streets.polylines[0].len(), 3);
    assert_eq!(places.len(), 1);
    let p = &places[0];
    assert_eq!(p.id, "4");
    assert_eq!(p.name, "Ville & Co");
    assert_eq!(p.population, Some(25000));
    assert_eq!(p.country, "FR");
    assert_eq!(p.place_kind, PlaceKind::City);
}

#[test]
fn osm_xml_malformed_reports_offset() {
    let doc = "<osm>\n  <node id=\"1\" lat=\"x\" lon=\"2\"/>\n</osm>";
    match parse_extract(doc.as_bytes(), ExtractFormat::OsmXml) {
        Err(Error::Parse { offset, .. }) => assert!(offset >= 5 && offset < doc.len(), "{offset}"),
        other => panic!("expected parse error, got {other:?}"),
    }
    let broken = "<osm><node id=\"1\" lat=\"1\" lon=\"2\"></way></osm>";
    assert!(matches!(
        parse_extract(broken.as_bytes(), ExtractFormat::OsmXml),
        Err(Error::Parse { .. })
    ));
}

fn place(pop: Option<u64>) -> PlaceRecord {
    PlaceRecord {
        id: format!("{pop:?}"),
        name: String::new(),
        country: "ZZ".into(),
        place_kind: PlaceKind::Town,
        population: pop,
        centroid: PointGeo { lon: 0.0, lat: 0.0 },
    }
}

#[test]
fn filter_places_examples() {
    let kept = filter_places(&[place(Some(1500)), place(Some(900)), place(None)], 1000);
    assert_eq!(kept, vec![place(Some(1500))]);

    let all: Vec<_> = (1..5).map(|i| place(Some(i))).collect();
    assert_eq!(filter_places(&all, 0), all);

    let ten: Vec<_> = (1..=10).map(|i| place(Some(i * 100))).collect();
    assert_eq!(filter_places(&ten, 500).len(), 5);
}

proptest! {
    #[test]
    fn filter_places_membership(pops in prop::collection::vec(prop::option::of(0u64..3000), 0..40), min in 0u64..3000) {
        let input: Vec<_> = pops.iter().map(|&p| place(p)).collect();
        let out = filter_places(&input, min);
        let expected: Vec<_> = input.iter().filter(|p| matches!(p.population, Some(n) if n > min)).cloned().collect();
        prop_assert_eq!(out, expected);
    }

    #[test]
    fn parse_never_invents_vertices(lines in prop::collection::vec(prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..6), 1..6)) {
        let features: Vec<String> = lines
            .iter()
            .map(|l| line_feature(Some("residential"), l))
            .collect();
        let doc = collection(&features);
        let (streets, _) = parse_extract(doc.as_bytes(), ExtractFormat::GeoJson).unwrap();
        for pl in &streets.polylines {
            for v in pl {
                prop_assert!(lines.iter().flatten().any(|&(x, y)| x == v.lon && y == v.lat));
            }
        }
    }
}

const CENTROID: PointGeo = PointGeo { lon: 2.3522, lat: 48.8566 };

fn offset_point(dx: f64, dy: f64) -> PointGeo {
    let zone = UtmZone::containing(CENTROID);
    let (c, _) = utm_project(CENTROID, Some(zone)).unwrap();
    utm_unproject(PointXY::new(c.x + dx, c.y + dy), zone).unwrap()
}

fn local(p: PointGeo) -> PointXY {
    let zone = UtmZone::containing(CENTROID);
    let (c, _) = utm_project(CENTROID, Some(zone)).unwrap();
    let (q, _) = utm_project(p, Some(zone)).unwrap();
    PointXY::new(q.x - c.x, q.y - c.y)
}

fn single(line: Vec<PointGeo>) -> RawStreetData {
    let mut d = RawStreetData::default();
    assert!(d.push(line, "residential"));
    d
}

#[test]
fn clip_inside_is_unchanged() {
    let d = single(vec![offset_point(-100.0, 0.0), offset_point(50.0, 20.0), offset_point(200.0, -300.0)]);
    assert_eq!(clip_box(&d, CENTROID, 500.0).unwrap(), d);
}

#[test]
fn clip_cuts_at_border() {
    let d = single(vec![CENTROID, offset_point(800.0, 0.0)]);
    let out = clip_box(&d, CENTROID, 500.0).unwrap();
    assert_eq!(out.polylines.len(), 1);
    let line = &out.polylines[0];
    assert_eq!(line.len(), 2);
    assert_eq!(line[0], CENTROID);
    let end = local(line[1]);
    assert!((end.x - 500.0).abs() < 1e-6, "{end:?}");
    assert!(end.y.abs() < 1e-6, "{end:?}");
}

#[test]
fn clip_outside_is_removed() {
    let d = single(vec![offset_point(600.0, 600.0), offset_point(900.0, 700.0)]);
    assert!(clip_box(&d, CENTROID, 500.0).unwrap().is_empty());
}

#[test]
fn clip_splits_reentering_polyline() {
    // out -> in -> out -> in
    let d = single(vec![
        offset_point(-700.0, 0.0),
        offset_point(0.0, 0.0),
        offset_point(0.0, 800.0),
        offset_point(100.0, 800.0),
        offset_point(100.0, 0.0),
    ]);
    let out = clip_box(&d, CENTROID, 500.0).unwrap();
    assert_eq!(out.polylines.len(), 2);
    assert_eq!(out.highway_tags, vec!["residential", "residential"]);
}

#[test]
fn clip_rejects_non_positive_width() {
    assert!(matches!(clip_box(&RawStreetData::default(), CENTROID, 0.0), Err(Error::Argument(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn clip_is_idempotent_and_bounded(lines in prop::collection::vec(prop::collection::vec((-1500.0f64..1500.0, -1500.0f64..1500.0), 2..8), 1..5)) {
        let mut d = RawStreetData::default();
        for l in &lines {
            d.push(l.iter().map(|&(x, y)| offset_point(x, y)).collect(), "residential");
        }
        let once = clip_box(&d, CENTROID, 500.0).unwrap();
        let twice = clip_box(&once, CENTROID, 500.0).unwrap();
        prop_assert_eq!(&once, &twice);
        for v in once.polylines.iter().flatten() {
            let p = local(*v);
            prop_assert!(p.x.abs() <= 500.0 + 1e-6 && p.y.abs() <= 500.0 + 1e-6, "{:?}", p);
        }
        for pl in &once.polylines {
            prop_assert!(pl.len() >= 2);
            prop_assert!(pl.windows(2).all(|w| w[0] != w[1]));
        }
    }
}

/// Serves one canned HTTP response and returns the request it received.
fn stub_server(status: &str, body: &'static [u8]) -> (String, thread::JoinHandle<Vec<u8>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/api/interpreter", listener.local_addr().unwrap());
    let status = status.to_string();
    let handle = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut request = Vec::new();
        let mut buf = [0u8; 4096];
        loop {
            let n = stream.read(&mut buf).unwrap();
            request.extend_from_slice(&buf[..n]);
            if let Some(end) = request.windows(4).position(|w| w == b"\r\n\r\n") {
                let head = String::from_utf8_lossy(&request[..end]).to_ascii_lowercase();
                let len = head
                    .lines()
                    .find_map(|l| l.strip_prefix("content-length:"))
                    .map_or(0, |v| v.trim().parse::<usize>().unwrap());
                if request.len() >= end + 4 + len || n == 0 {
                    break;
                }
            }
            if n == 0 {
                break;
            }
        }
        let head = format!(
            "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            body.len()
        );
        stream.write_all(head.as_bytes()).unwrap();
        stream.write_all(body).unwrap();
        request
    });
    (url, handle)
}

fn query() -> OverpassQuery {
    OverpassQuery {
        south: 48.85,
        west: 2.34,
        north: 48.86,
        east: 2.36,
        highway_filter: None,
    }
}

#[test]
fn fetch_returns_body_verbatim() {
    let body: &'static [u8] = br#"{"type":"FeatureCollection","features":[]}"#;
    let (url, server) = stub_server("200 OK", body);
    let bytes = fetch_overpass(&url, &query(), Duration::from_secs(5)).unwrap();
    assert_eq!(bytes, body);
    let request = String::from_utf8(server.join().unwrap()).unwrap();
    assert!(request.starts_with("POST "));
    assert!(request.contains("48.85,2.34,48.86,2.36"));
}

#[test]
fn fetch_reports_http_status() {
    let (url, server) = stub_server("429 Too Many Requests", b"slow down");
    match fetch_overpass(&url, &query(), Duration::from_secs(5)) {
        Err(Error::Fetch { status, endpoint, .. }) => {
            assert_eq!(status, Some(429));
            assert_eq!(endpoint, url);
        }
        other => panic!("expected fetch error, got {other:?}"),
    }
    server.join().unwrap();
}

#[test]
fn fetch_unreachable_endpoint() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let url = format!("http://127.0.0.1:{port}/");
    match fetch_overpass(&url, &query(), Duration::from_secs(2)) {
        Err(Error::Fetch { status: None, .. }) => {}
        other => panic!("expected fetch error, got {other:?}"),
    }
}
