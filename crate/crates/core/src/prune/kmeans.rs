//! K-means over pattern vectors and singleton ("unique functionality")
//! detection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    /// Cluster of every filter; `None` for singletons.
    pub assignments: Vec<Option<usize>>,
    /// Mean vector of each cluster's current members.
    pub centroids: Vec<Vec<f64>>,
    /// Filters excluded from pruning, ascending.
    pub singletons: Vec<usize>,
    pub k: usize,
    /// Total squared distance of clustered points to their centroids.
    pub inertia: f64,
    /// Inertia after every Lloyd iteration.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusterReport {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == Some(cluster))
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for c in self.assignments.iter().flatten() {
            sizes[*c] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn to_f64<T: Scalar>(vectors: &[Vec<T>]) -> Result<Vec<Vec<f64>>> {
    let dim = vectors.first().map_or(0, Vec::len);
    vectors
        .iter()
        .map(|v| {
            if v.len() != dim {
                return Err(Error::ShapeMismatch {
                    op: "kmeans (vector length)",
                    expected: vec![dim],
                    actual: vec![v.len()],
                });
            }
            Ok(v.iter().map(|x| x.as_f64()).collect())
        })
        .collect()
}

/// k-means++ seeding: first centre uniform, then proportional to the squared
/// distance to the nearest chosen centre.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // guard against landing on an already-covered point through rounding
            if nearest[chosen] == 0.0 {
                chosen = (0..points.len()).rev().find(|&i| nearest[i] > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            // fewer distinct points than k; empty-cluster repair sorts it out
            rng.gen_range(0..points.len())
        };
        centroids.push(points[pick].clone());
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centroids.last().unwrap()));
        }
    }
    centroids
}

/// Nearest centroid, ties to the lowest cluster id.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn means(points: &[Vec<f64>], assign: &[Option<usize>], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, a) in points.iter().zip(assign) {
        if let Some(c) = *a {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((s, n), prev)| {
            if n == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|v| v / n as f64).collect()
            }
        })
        .collect()
}

fn inertia(points: &[Vec<f64>], assign: &[Option<usize>], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assign)
        .filter_map(|(p, a)| a.map(|c| sq_dist(p, &centroids[c])))
        .sum()
}

/// Moves, for every empty cluster, the point farthest from its own centroid
/// (taken from a cluster with at least two members) into it.
fn repair_empty(points: &[Vec<f64>], assign: &mut [usize], centroids: &mut [Vec<f64>]) {
    for c in 0..centroids.len() {
        let mut counts = vec![0usize; centroids.len()];
        for &a in assign.iter() {
            counts[a] += 1;
        }
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| counts[assign[i]] > 1)
            .max_by(|&i, &j| {
                let di = sq_dist(&points[i], &centroids[assign[i]]);
                let dj = sq_dist(&points[j], &centroids[assign[j]]);
                di.total_cmp(&dj).then(j.cmp(&i))
            });
        if let Some(i) = donor {
            assign[i] = c;
            centroids[c] = points[i].clone();
        }
    }
}

/// Lloyd's algorithm from k-means++ seeds, iterated to an assignment fixpoint
/// or [`MAX_LLOYD_ITERATIONS`]. No singletons are marked yet.
pub fn kmeans_patterns<T: Scalar>(vectors: &[Vec<T>], k: usize, seed: u64) -> Result<ClusterReport> {
    if k == 0 || k > vectors.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            vectors.len()
        )));
    }
    let points = to_f64(vectors)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(&points, k, &mut rng);
    let mut assign: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        repair_empty(&points, &mut next, &mut centroids);
        let as_opt: Vec<Option<usize>> = next.iter().map(|&c| Some(c)).collect();
        centroids = means(&points, &as_opt, &centroids);
        trace.push(inertia(&points, &as_opt, &centroids));
        let converged = next == assign;
        assign = next;
        if converged {
            break;
        }
    }
    let assignments: Vec<Option<usize>> = assign.into_iter().map(Some).collect();
    Ok(ClusterReport {
        inertia: *trace.last().unwrap(),
        inertia_trace: trace,
        assignments,
        centroids,
        singletons: Vec::new(),
        k,
        iterations,
    })
}

/// Linear-interpolation percentile (`p` in 0..=100) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (p.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Marks as singletons the members of size-1 clusters and every point whose
/// distance to its own centroid exceeds the `tau_percentile` of all
/// point-to-own-centroid distances; singletons leave their clusters and the
/// centroids are recomputed from the remaining members.
pub fn detect_singletons<T: Scalar>(report: &ClusterReport, vectors: &[Vec<T>], tau_percentile: f64) -> Result<ClusterReport> {
    let points = to_f64(vectors)?;
    if points.len() != report.assignments.len() {
        return Err(Error::ShapeMismatch {
            op: "detect_singletons",
            expected: vec![report.assignments.len()],
            actual: vec![points.len()],
        });
    }
    let sizes = report.sizes();
    let dists: Vec<Option<f64>> = points
        .iter()
        .zip(&report.assignments)
        .map(|(p, a)| a.map(|c| sq_dist(p, &report.centroids[c]).sqrt()))
        .collect();
    let pooled: Vec<f64> = dists.iter().flatten().copied().collect();
    let threshold = percentile(&pooled, tau_percentile);

    let mut out = report.clone();
    for (i, (a, d)) in report.assignments.iter().zip(&dists).enumerate() {
        let (Some(c), Some(d)) = (a, d) else { continue };
        if sizes[*c] == 1 || *d > threshold {
            out.assignments[i] = None;
            out.singletons.push(i);
        }
    }
    out.singletons.sort_unstable();
    out.singletons.dedup();
    out.centroids = means(&points, &out.assignments, &report.centroids);
    out.inertia = inertia(&points, &out.assignments, &out.centroids);
    Ok(out)
}
