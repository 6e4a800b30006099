//! Corpus-level numerics: diversity metrics (MCD, CE, CD), golden-comparison
//! metrics (FID, PRD-Fβ, KL, HC), the shared k-means binning they rely on,
//! and a 2D PCA projection for plots.
//!
//! Normalization convention: all cosine-based metrics and the k-means
//! binning operate on l2-normalized vectors; the Fréchet distance operates
//! on raw provider vectors.

mod diversity;
mod kmeans;
mod pca;
mod similarity;

pub use diversity::{
    centroid_distance, cluster_entropy, emotion_centroids, mean_cosine_distance,
    mean_cosine_distance_seq,
};
pub use kmeans::{bin_corpora, kmeans, kmeans_seq, ClusterAssignment};
pub use pca::{pca_project, pca_table, PcaPoint};
pub use similarity::{
    frechet_distance, histogram_cosine, kl_divergence, matrix_sqrt_psd, prd_f_beta,
    DEFAULT_LAMBDA_GRID,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedding::{l2_normalize, EmbeddedCorpus};
use crate::error::{Error, Result};

/// Per-emotion diversity figures: lexical spread (MCD) and distributional
/// uniformity over the shared clusters (CE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionDiversity {
    /// Mean pairwise cosine distance within the emotion; in [0, 2].
    pub mcd: f64,
    /// Shannon entropy (natural log) of the emotion's cluster occupancy;
    /// in [0, ln k_clusters].
    pub ce: f64,
}

/// Diversity evaluation of one corpus: per-emotion MCD/CE plus the
/// corpus-level centroid-separation scalar CD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub per_emotion: BTreeMap<String, EmotionDiversity>,
    /// Mean pairwise cosine distance among emotion centroids.
    pub cd: f64,
    /// Number of shared k-means clusters CE was computed over.
    pub k_clusters: usize,
}

/// Golden-comparison evaluation of a synthetic corpus against a real one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// Fréchet distance between Gaussian fits, on raw vectors.
    pub fid: f64,
    /// Max Fβ along the precision-recall-for-distributions curve.
    pub prd_f_beta: f64,
    pub beta: f64,
    /// KL(real ‖ synthetic) over the shared cluster histograms,
    /// ε-smoothed. Lower = more similar.
    pub kl: f64,
    /// Cosine similarity between the cluster-occupancy histograms.
    pub hc: f64,
    pub k_bins: usize,
    pub epsilon: f64,
}

/// Cosine distance 1 − cos(a, b), computed on l2-normalized copies of the
/// inputs. A zero vector has no direction and yields distance 1 from
/// everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (ua, _) = l2_normalize(a);
    let (ub, _) = l2_normalize(b);
    1.0 - dot(&ua, &ub)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized_vectors(corpus: &EmbeddedCorpus) -> Vec<Vec<f64>> {
    corpus
        .samples
        .iter()
        .map(|s| l2_normalize(&s.vector).0)
        .collect()
}

/// Indices of `corpus` samples per label, in sorted label order.
fn label_subsets(corpus: &EmbeddedCorpus) -> BTreeMap<String, Vec<usize>> {
    let mut subsets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, sample) in corpus.samples.iter().enumerate() {
        subsets
            .entry(sample.label.as_str().to_string())
            .or_default()
            .push(i);
    }
    subsets
}

/// Compute the full diversity report for one embedded corpus: a shared
/// k-means fit on the normalized vectors, per-emotion MCD and CE, and the
/// corpus-level CD over emotion centroids.
///
/// `k_clusters` is reduced (with a warning) when the corpus holds fewer
/// samples than requested clusters.
pub fn diversity_report(
    corpus: &EmbeddedCorpus,
    k_clusters: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<DiversityReport> {
    if corpus.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "diversity report".into(),
            needed: 2,
            found: 0,
        });
    }
    let vectors = normalized_vectors(corpus);
    let k = if k_clusters > vectors.len() {
        log::warn!(
            "k_clusters {} exceeds corpus size {}; clamping",
            k_clusters,
            vectors.len()
        );
        vectors.len()
    } else {
        k_clusters
    };
    let assignment = kmeans(&vectors, k, seed, max_iters, tol)?;

    let mut per_emotion = BTreeMap::new();
    for (label, indices) in label_subsets(corpus) {
        let subset: Vec<Vec<f64>> = indices.iter().map(|&i| vectors[i].clone()).collect();
        let mcd = mean_cosine_distance(&subset).map_err(|err| match err {
            Error::InsufficientSamples { needed, found, .. } => Error::InsufficientSamples {
                context: format!("MCD for emotion `{label}`"),
                needed,
                found,
            },
            other => other,
        })?;
        let ce = cluster_entropy(&assignment, &indices)?;
        per_emotion.insert(label, EmotionDiversity { mcd, ce });
    }

    let centroids = emotion_centroids(corpus);
    let centroid_vectors: Vec<Vec<f64>> = centroids.into_iter().map(|(_, v)| v).collect();
    let cd = centroid_distance(&centroid_vectors)?;

    Ok(DiversityReport {
        per_emotion,
        cd,
        k_clusters: k,
    })
}

/// Compute the full similarity report of a synthetic corpus against the
/// real (golden) corpus: FID on raw vectors plus PRD-Fβ / KL / HC over the
/// shared k-means bin histograms.
#[allow(clippy::too_many_arguments)]
pub fn similarity_report(
    real: &EmbeddedCorpus,
    synthetic: &EmbeddedCorpus,
    k_bins: usize,
    beta: f64,
    epsilon: f64,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<SimilarityReport> {
    if real.provider_tag != synthetic.provider_tag {
        log::warn!(
            "comparing corpora embedded by different providers: `{}` vs `{}`",
            real.provider_tag,
            synthetic.provider_tag
        );
    }
    let fid = frechet_distance(&real.vectors(), &synthetic.vectors())?;
    let total = real.len() + synthetic.len();
    let k = if k_bins > total {
        log::warn!(
            "k_bins {} exceeds pooled corpus size {}; clamping",
            k_bins,
            total
        );
        total
    } else {
        k_bins
    };
    let (p, q, _assignment) = bin_corpora(real, synthetic, k, seed, max_iters, tol)?;
    let prd = prd_f_beta(&p, &q, beta, DEFAULT_LAMBDA_GRID)?;
    let kl = kl_divergence(&p, &q, epsilon)?;
    let hc = histogram_cosine(&p, &q)?;
    Ok(SimilarityReport {
        fid,
        prd_f_beta: prd,
        beta,
        kl,
        hc,
        k_bins: k,
        epsilon,
    })
}
