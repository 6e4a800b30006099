//! Seeded k-means (k-means++ initialization, Lloyd iterations) and the
//! shared corpus binning built on it. The assignment step may run in
//! parallel; all reductions (centroid accumulation, inertia) run in a fixed
//! sequential order so results are bit-stable for a given seed regardless
//! of thread count.

use rand::Rng;

use crate::embedding::{l2_normalize, EmbeddedCorpus};
use crate::error::{Error, Result};
use crate::exec::map_ordered;
use crate::rng::seeded;

/// The outcome of one k-means fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// k centroids, each of the corpus dimension.
    pub centroids: Vec<Vec<f64>>,
    /// Per-sample cluster index in [0, k).
    pub labels: Vec<usize>,
    /// Sum of squared distances of samples to their assigned centroid.
    pub inertia: f64,
    pub seed: u64,
    /// Set when the input held fewer distinct points than clusters; the fit
    /// is still returned, padded by empty-cluster re-seeding.
    pub degenerate: bool,
    /// Inertia after each assignment step; non-increasing.
    pub inertia_trace: Vec<f64>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid index, ties broken toward the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], parallel: bool) -> Vec<usize> {
    map_ordered(points, parallel, |p| nearest(p, centroids))
}

/// Sequential inertia in fixed sample order (bit-stable).
fn inertia_of(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &j)| sq_dist(p, &centroids[j]))
        .sum()
}

/// k-means++ seeding: first centroid uniform, each subsequent centroid
/// drawn with probability proportional to squared distance from the
/// nearest centroid chosen so far.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut crate::rng::Prng) -> Vec<Vec<f64>> {
    let n = points.len();
    let first = rng.gen_range(0..n);
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut cumulative = 0.0;
            let mut chosen = None;
            let mut last_positive = first;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                last_positive = i;
                cumulative += w;
                if target < cumulative {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or(last_positive)
        } else {
            // All remaining points coincide with chosen centroids.
            rng.gen_range(0..n)
        };
        let centroid = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroid));
        }
        centroids.push(centroid);
    }
    centroids
}

/// Mean of each cluster's points (sequential, fixed order); empty clusters
/// are re-seeded at the point farthest from its assigned centroid, lowest
/// index winning ties.
fn update_centroids(points: &[Vec<f64>], labels: &[usize], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = old.len();
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &j) in points.iter().zip(labels) {
        counts[j] += 1;
        for (s, x) in sums[j].iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut centroids: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            if counts[j] > 0 {
                sums[j].iter().map(|s| s / counts[j] as f64).collect()
            } else {
                old[j].clone()
            }
        })
        .collect();

    let empties: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if !empties.is_empty() {
        let mut dist_to_own: Vec<f64> = points
            .iter()
            .zip(labels)
            .map(|(p, &j)| sq_dist(p, &centroids[j]))
            .collect();
        for j in empties {
            let mut best = 0;
            let mut best_d = -1.0;
            for (i, &d) in dist_to_own.iter().enumerate() {
                if d > best_d {
                    best_d = d;
                    best = i;
                }
            }
            centroids[j] = points[best].clone();
            dist_to_own[best] = -1.0;
        }
    }
    centroids
}

fn kmeans_impl(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
    parallel: bool,
) -> Result<ClusterAssignment> {
    if k == 0 {
        return Err(Error::DegenerateInput("k-means requires k ≥ 1".into()));
    }
    if points.len() < k {
        return Err(Error::InsufficientSamples {
            context: "k-means".into(),
            needed: k,
            found: points.len(),
        });
    }
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "k-means input".into(),
                expected: dim,
                found: p.len(),
            });
        }
    }

    let mut distinct = std::collections::BTreeSet::new();
    for p in points {
        distinct.insert(p.iter().map(|x| x.to_bits()).collect::<Vec<u64>>());
        if distinct.len() >= k {
            break;
        }
    }
    let degenerate = distinct.len() < k;
    if degenerate {
        log::warn!(
            "k-means asked for {k} clusters but input has only {} distinct points",
            distinct.len()
        );
    }

    let mut rng = seeded(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut labels = assign(points, &centroids, parallel);
    let mut inertia = inertia_of(points, &labels, &centroids);
    let mut trace = vec![inertia];

    for _ in 0..max_iters {
        let next = update_centroids(points, &labels, &centroids);
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centroids = next;
        labels = assign(points, &centroids, parallel);
        inertia = inertia_of(points, &labels, &centroids);
        trace.push(inertia);
        if shift < tol {
            break;
        }
    }

    Ok(ClusterAssignment {
        centroids,
        labels,
        inertia,
        seed,
        degenerate,
        inertia_trace: trace,
    })
}

/// Seeded k-means fit; the assignment step uses the crate's data-parallel
/// executor when the `parallel` feature is active.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    kmeans_impl(points, k, seed, max_iters, tol, true)
}

/// Strictly sequential k-means fit; bitwise-identical to [`kmeans`] for a
/// given seed (the parallel path preserves operation order).
pub fn kmeans_seq(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    kmeans_impl(points, k, seed, max_iters, tol, false)
}

/// Fit a shared k-means binning on the union of both corpora (real corpus
/// first, all vectors l2-normalized) and return each corpus's bin-frequency
/// histogram plus the fit itself. Both histograms sum to 1.
pub fn bin_corpora(
    real: &EmbeddedCorpus,
    synthetic: &EmbeddedCorpus,
    k_bins: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>, ClusterAssignment)> {
    if real.is_empty() || synthetic.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "corpus binning".into(),
            needed: 1,
            found: 0,
        });
    }
    if real.dim != synthetic.dim {
        return Err(Error::DimensionMismatch {
            context: "corpus binning".into(),
            expected: real.dim,
            found: synthetic.dim,
        });
    }
    let mut union: Vec<Vec<f64>> = Vec::with_capacity(real.len() + synthetic.len());
    for sample in real.samples.iter().chain(&synthetic.samples) {
        union.push(l2_normalize(&sample.vector).0);
    }
    let assignment = kmeans(&union, k_bins, seed, max_iters, tol)?;

    let histogram = |labels: &[usize], n: usize| -> Vec<f64> {
        let mut counts = vec![0usize; k_bins];
        for &j in labels {
            counts[j] += 1;
        }
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    };
    let p = histogram(&assignment.labels[..real.len()], real.len());
    let q = histogram(&assignment.labels[real.len()..], synthetic.len());
    Ok((p, q, assignment))
}
