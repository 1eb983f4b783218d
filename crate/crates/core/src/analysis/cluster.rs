use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::PlaceRecord;
use crate::tensor::Tensor;

pub const DEFAULT_K: usize = 7;
pub const DEFAULT_MAX_ITER: usize = 300;
/// Independent k-means++ restarts per `k` on the elbow curve.
pub const ELBOW_RESTARTS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    /// `k` rows of width `d`.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step; non-increasing.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rows(data: &Tensor) -> Result<Vec<&[f64]>> {
    let (m, _) = data.dims2()?;
    if !data.is_finite() {
        return Err(Error::NonFinite { op: "kmeans" });
    }
    Ok((0..m).map(|r| data.row(r)).collect())
}

/// Nearest centroid per point (lowest index on ties) and the total inertia.
fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(i, c)| (i, sq_dist(p, c)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            inertia += d;
            best
        })
        .collect();
    (labels, inertia)
}

fn kmeans_pp(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = points.len();
    let mut centroids = vec![points[rng.random_range(0..m)].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..m)
        };
        centroids.push(points[next].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centroids.last().unwrap()));
        }
    }
    centroids
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing or `max_iter` updates have run. Empty clusters are re-seeded at
/// the point farthest from its centroid.
fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> ClusterResult {
    let k = centroids.len();
    let dim = centroids[0].len();
    let (mut labels, mut inertia) = assign(points, &centroids);
    let mut trace = vec![inertia];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(points[a], &centroids[labels[a]]);
                        let db = sq_dist(points[b], &centroids[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty data");
                centroids[c] = points[far].to_vec();
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
            }
        }
        let (next, next_inertia) = assign(points, &centroids);
        assert!(
            next_inertia <= inertia * (1.0 + 1e-12) + 1e-12,
            "k-means inertia increased from {inertia} to {next_inertia}"
        );
        trace.push(next_inertia);
        inertia = next_inertia;
        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
    }
    ClusterResult {
        k,
        assignments: labels,
        centroids,
        inertia,
        iterations,
        inertia_trace: trace,
    }
}

/// k-means++ seeded k-means on the rows of `data` `[M, d]`.
pub fn kmeans(data: &Tensor, k: usize, seed: u64, max_iter: usize) -> Result<ClusterResult> {
    let points = rows(data)?;
    if k == 0 || points.len() < k {
        return Err(Error::Argument(format!("k = {k} needs 1..={} points", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(lloyd(&points, kmeans_pp(&points, k, &mut rng), max_iter))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowCurve {
    pub points: Vec<(usize, f64)>,
    pub suggested_k: usize,
    /// The best clustering found for each `k`, aligned with `points`.
    #[serde(skip)]
    pub results: Vec<ClusterResult>,
}

/// Best-of-restarts inertia for each `k` in `ks` (ascending, within `1..=M`).
/// Each `k` also tries a warm start from the previous `k`'s centroids plus
/// the worst-fit point, which keeps the curve non-increasing. The suggested
/// `k` lies farthest below the chord joining the curve's endpoints.
pub fn elbow_curve(data: &Tensor, ks: &[usize], seed: u64) -> Result<ElbowCurve> {
    let points = rows(data)?;
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] == 0 || *ks.last().unwrap() > points.len() {
        return Err(Error::Argument(format!(
            "k range must be ascending within 1..={}",
            points.len()
        )));
    }
    let mut results: Vec<ClusterResult> = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut best: Option<ClusterResult> = None;
        let mut consider = |r: ClusterResult| {
            if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
                best = Some(r);
            }
        };
        for restart in 0..ELBOW_RESTARTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ k as u64);
            consider(lloyd(&points, kmeans_pp(&points, k, &mut rng), DEFAULT_MAX_ITER));
        }
        if let Some(prev) = results.last() {
            let mut warm = prev.centroids.clone();
            while warm.len() < k {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = warm.iter().map(|c| sq_dist(points[a], c)).fold(f64::INFINITY, f64::min);
                        let db = warm.iter().map(|c| sq_dist(points[b], c)).fold(f64::INFINITY, f64::min);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty data");
                warm.push(points[far].to_vec());
            }
            consider(lloyd(&points, warm, DEFAULT_MAX_ITER));
        }
        results.push(best.expect("at least one run"));
    }
    let curve: Vec<(usize, f64)> = results.iter().map(|r| (r.k, r.inertia)).collect();
    let (k0, i0) = (curve[0].0 as f64, curve[0].1);
    let (k1, i1) = (curve[curve.len() - 1].0 as f64, curve[curve.len() - 1].1);
    let mut suggested = curve[0].0;
    let mut best_gap = f64::NEG_INFINITY;
    if curve.len() > 2 {
        for &(k, inertia) in &curve {
            // Signed vertical gap below the chord is proportional to the
            // perpendicular distance for a fixed chord.
            let chord = i0 + (i1 - i0) * (k as f64 - k0) / (k1 - k0);
            let gap = chord - inertia;
            if gap > best_gap {
                best_gap = gap;
                suggested = k;
            }
        }
    }
    Ok(ElbowCurve {
        points: curve,
        suggested_k: suggested,
        results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountrySummary {
    pub country: String,
    pub mode: usize,
    /// Another label shares the modal count (the lowest label is reported).
    pub tied: bool,
    /// Number of distinct labels present.
    pub variety: usize,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub histogram: Vec<usize>,
    pub countries: Vec<CountrySummary>,
}

/// Global label histogram and per-country modal label and variety.
/// `graph_ids[i]` names the place of the graph labelled `result.assignments[i]`.
pub fn cluster_summaries(result: &ClusterResult, graph_ids: &[String], places: &[PlaceRecord]) -> Result<ClusterSummary> {
    if graph_ids.len() != result.assignments.len() {
        return Err(Error::Argument(format!(
            "{} graph ids for {} assignments",
            graph_ids.len(),
            result.assignments.len()
        )));
    }
    let by_id: std::collections::HashMap<&str, &PlaceRecord> = places.iter().map(|p| (p.id.as_str(), p)).collect();
    let missing: Vec<String> = graph_ids.iter().filter(|id| !by_id.contains_key(id.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::Join(missing));
    }
    let mut histogram = vec![0usize; result.k];
    let mut per_country: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (id, &label) in graph_ids.iter().zip(&result.assignments) {
        histogram[label] += 1;
        let country = by_id[id.as_str()].country.as_str();
        per_country.entry(country).or_insert_with(|| vec![0; result.k])[label] += 1;
    }
    let countries = per_country
        .into_iter()
        .map(|(country, counts)| {
            let max = *counts.iter().max().unwrap_or(&0);
            let mode = counts.iter().position(|&c| c == max).unwrap_or(0);
            CountrySummary {
                country: country.to_string(),
                mode,
                tied: counts.iter().filter(|&&c| c == max).count() > 1,
                variety: counts.iter().filter(|&&c| c > 0).count(),
                counts,
            }
        })
        .collect();
    Ok(ClusterSummary { histogram, countries })
}
