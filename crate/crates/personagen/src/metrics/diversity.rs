//! Diversity metrics: mean cosine distance (MCD) within an emotion,
//! cluster entropy (CE) of an emotion's spread over shared clusters, and
//! centroid distance (CD) between emotion categories.

use std::collections::BTreeMap;

use super::kmeans::ClusterAssignment;
use super::{cosine_distance, dot};
use crate::embedding::{l2_normalize, EmbeddedCorpus};
use crate::error::{Error, Result};
use crate::exec::map_range;

fn mcd_impl(vectors: &[Vec<f64>], parallel: bool) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            context: "mean cosine distance".into(),
            needed: 2,
            found: n,
        });
    }
    let unit: Vec<Vec<f64>> = vectors.iter().map(|v| l2_normalize(v).0).collect();
    // Each task owns one row of the upper triangle; the per-row partial
    // sums are reduced sequentially in row order so the parallel and
    // sequential paths perform identical floating-point operations.
    let partials = map_range(n, parallel, |i| {
        let mut acc = 0.0;
        for j in (i + 1)..n {
            acc += 1.0 - dot(&unit[i], &unit[j]);
        }
        acc
    });
    let total: f64 = partials.iter().sum();
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(total / pairs)
}

/// Mean pairwise cosine distance (1 − cosine similarity on l2-normalized
/// vectors) over all unordered pairs. In [0, 2].
pub fn mean_cosine_distance(vectors: &[Vec<f64>]) -> Result<f64> {
    mcd_impl(vectors, true)
}

/// Strictly sequential MCD; bitwise-identical to [`mean_cosine_distance`].
pub fn mean_cosine_distance_seq(vectors: &[Vec<f64>]) -> Result<f64> {
    mcd_impl(vectors, false)
}

/// Shannon entropy (natural log) of a sample subset's empirical
/// distribution over the fit's clusters. In [0, ln k]; 0 iff the subset
/// occupies a single cluster.
pub fn cluster_entropy(assignment: &ClusterAssignment, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "cluster entropy".into(),
            needed: 1,
            found: 0,
        });
    }
    let mut counts = vec![0usize; assignment.k()];
    for &i in subset {
        let cluster = *assignment.labels.get(i).ok_or_else(|| {
            Error::DegenerateInput(format!(
                "subset index {i} outside assignment of {} samples",
                assignment.labels.len()
            ))
        })?;
        counts[cluster] += 1;
    }
    let total = subset.len() as f64;
    let entropy = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>();
    Ok(entropy.max(0.0))
}

/// Mean pairwise cosine distance among category centroids — the
/// corpus-level separation scalar.
pub fn centroid_distance(centroids: &[Vec<f64>]) -> Result<f64> {
    let n = centroids.len();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            context: "centroid distance".into(),
            needed: 2,
            found: n,
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += cosine_distance(&centroids[i], &centroids[j]);
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// Per-label centroid: the arithmetic mean of the label's l2-normalized
/// vectors, keyed and ordered by label.
pub fn emotion_centroids(corpus: &EmbeddedCorpus) -> Vec<(String, Vec<f64>)> {
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for sample in &corpus.samples {
        let unit = l2_normalize(&sample.vector).0;
        let entry = sums
            .entry(sample.label.as_str().to_string())
            .or_insert_with(|| (vec![0.0; corpus.dim], 0));
        for (s, x) in entry.0.iter_mut().zip(&unit) {
            *s += x;
        }
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(label, (sum, count))| {
            let mean = sum.iter().map(|s| s / count as f64).collect();
            (label, mean)
        })
        .collect()
}
