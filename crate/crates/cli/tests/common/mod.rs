//! Synthetic extracts and helpers for driving the `streetvae` binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const M_PER_DEG_LAT: f64 = 111_320.0;

pub struct Town {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    pub country: &'static str,
    pub population: u64,
}

/// Town `i` of a deterministic family spread over a few countries.
pub fn town(i: usize) -> Town {
    const COUNTRIES: [&str; 3] = ["DE", "FR", "NL"];
    Town {
        id: format!("node/{}", 1000 + i),
        lon: 5.0 + 0.05 * (i % 10) as f64,
        lat: 48.0 + 0.05 * (i / 10) as f64,
        country: COUNTRIES[i % 3],
        population: 5000 + 100 * i as u64,
    }
}

/// Jittered street lattice around the town, one two-point LineString per
/// lattice edge, spanning well past the 1 km study box. About a tenth of
/// the edges are dropped.
pub fn town_features(t: &Town, seed: u64) -> Vec<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = rng.random_range(180.0..260.0);
    let half = (700.0 / spacing) as i64;
    let m_per_deg_lon = M_PER_DEG_LAT * t.lat.to_radians().cos();
    let side = (2 * half + 1) as usize;
    let mut pts = Vec::with_capacity(side * side);
    for j in -half..=half {
        for i in -half..=half {
            let x = i as f64 * spacing + rng.random_range(-25.0..25.0);
            let y = j as f64 * spacing + rng.random_range(-25.0..25.0);
            pts.push([t.lon + x / m_per_deg_lon, t.lat + y / M_PER_DEG_LAT]);
        }
    }
    let mut features = vec![json!({
        "type": "Feature",
        "id": t.id,
        "geometry": {"type": "Point", "coordinates": [t.lon, t.lat]},
        "properties": {"place": "town", "name": format!("Town {}", t.id), "population": t.population.to_string(), "ISO3166-1:alpha2": t.country}
    })];
    for r in 0..side {
        for c in 0..side {
            let k = r * side + c;
            for n in [(c + 1 < side).then(|| k + 1), (r + 1 < side).then(|| k + side)].into_iter().flatten() {
                if rng.random_bool(0.1) {
                    continue;
                }
                features.push(json!({
                    "type": "Feature",
                    "geometry": {"type": "LineString", "coordinates": [pts[k], pts[n]]},
                    "properties": {"highway": "residential"}
                }));
            }
        }
    }
    features
}

pub fn write_extract(path: &Path, towns: &[Town], seed: u64) {
    let features: Vec<Value> = towns
        .iter()
        .enumerate()
        .flat_map(|(i, t)| town_features(t, seed.wrapping_mul(1000).wrapping_add(i as u64)))
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    std::fs::write(path, serde_json::to_vec(&doc).unwrap()).unwrap();
}

/// `n` single-town extracts `town_<i>.geojson` in `dir`.
pub fn write_towns(dir: &Path, n: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        write_extract(&dir.join(format!("town_{i:02}.geojson")), &[town(i)], i as u64);
    }
}

/// Small models so the pipeline runs in seconds.
pub const SMALL: &[&str] = &[
    "--feature-dim", "16", "--node-layers", "1", "--node-heads", "2", "--node-ff", "32",
    "--node-epochs", "2", "--node-batch", "4", "--vgae-epochs", "5", "--hidden-dim", "16",
    "--latent-dim", "4", "--n-cap", "128", "--embed-dim", "4", "--count", "5",
];

pub fn streetvae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streetvae"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("STREETVAE_OVERPASS_URL")
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = streetvae(args);
    assert!(
        out.status.success(),
        "streetvae {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(SMALL);
    v
}

/// Every file below `dir`, relative path and bytes, in sorted order.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
