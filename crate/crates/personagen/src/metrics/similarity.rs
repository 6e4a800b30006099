//! Golden-comparison metrics: Fréchet distance between Gaussian fits,
//! PRD-Fβ, KL divergence, and histogram cosine similarity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Number of angular λ grid points for the PRD curve.
pub const DEFAULT_LAMBDA_GRID: usize = 1001;

/// Eigenvalues below this are treated as zero when taking matrix roots.
const EIGEN_CLAMP: f64 = 1e-10;

/// Probability histograms may deviate from unit mass by at most this.
const HISTOGRAM_SUM_TOLERANCE: f64 = 1e-6;

fn dims_consistent(set: &[Vec<f64>], context: &str) -> Result<usize> {
    let dim = set.first().map(|v| v.len()).unwrap_or(0);
    for v in set {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                context: context.into(),
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(dim)
}

/// Sample mean and covariance (N−1 denominator). When the sample count is
/// below dim+1 the covariance cannot be full rank, so diagonal shrinkage
/// γI with γ = 1e-6 · trace/dim is added.
fn gaussian_fit(set: &[Vec<f64>], context: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = set.len();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            context: context.into(),
            needed: 2,
            found: n,
        });
    }
    let dim = dims_consistent(set, context)?;
    let mut mean = DVector::zeros(dim);
    for v in set {
        mean += DVector::from_column_slice(v);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    for v in set {
        let centered = DVector::from_column_slice(v) - &mean;
        cov += &centered * centered.transpose();
    }
    cov /= (n - 1) as f64;
    if n < dim + 1 {
        let gamma = 1e-6 * cov.trace() / dim as f64;
        for i in 0..dim {
            cov[(i, i)] += gamma;
        }
    }
    Ok((mean, cov))
}

/// Principal square root of a (near-)positive-semidefinite symmetric
/// matrix via eigendecomposition, clamping eigenvalues below 1e-10 to
/// zero. Satisfies S·S ≈ M for PSD M.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig
        .eigenvalues
        .map(|l| if l < EIGEN_CLAMP { 0.0 } else { l.sqrt() });
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits of two vector sets:
/// ‖μA−μB‖² + Tr(ΣA + ΣB − 2(ΣA ΣB)^{1/2}), computed via the symmetric
/// form (ΣA^{1/2} ΣB ΣA^{1/2})^{1/2}. Negative results within numerical
/// tolerance are clamped to 0.
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let (mu_a, cov_a) = gaussian_fit(a, "Fréchet distance, first set")?;
    let (mu_b, cov_b) = gaussian_fit(b, "Fréchet distance, second set")?;
    if mu_a.len() != mu_b.len() {
        return Err(Error::DimensionMismatch {
            context: "Fréchet distance".into(),
            expected: mu_a.len(),
            found: mu_b.len(),
        });
    }
    let sqrt_a = matrix_sqrt_psd(&cov_a);
    let inner = &sqrt_a * &cov_b * &sqrt_a;
    let sym = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let trace_sqrt: f64 = eig
        .eigenvalues
        .iter()
        .map(|&l| if l < EIGEN_CLAMP { 0.0 } else { l.sqrt() })
        .sum();
    let fid = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
    if fid < -1e-8 {
        log::warn!("Fréchet distance {fid} below numerical tolerance; clamping to 0");
    }
    Ok(fid.max(0.0))
}

fn shared_bins(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::InvalidHistogram(format!(
            "histograms must share bins: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

fn validate_probability_histogram(h: &[f64], name: &str) -> Result<()> {
    if h.is_empty() {
        return Err(Error::InvalidHistogram(format!("{name} has no bins")));
    }
    if let Some(bad) = h.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidHistogram(format!(
            "{name} has invalid mass {bad}"
        )));
    }
    let sum: f64 = h.iter().sum();
    if (sum - 1.0).abs() > HISTOGRAM_SUM_TOLERANCE {
        return Err(Error::InvalidHistogram(format!(
            "{name} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Max Fβ along the PRD curve between histograms P and Q:
/// precision α(λ) = Σ min(λpᵢ, qᵢ), recall r(λ) = Σ min(pᵢ, qᵢ/λ), swept
/// over `grid_points` angularly equispaced λ = tan(θ), θ ∈ (0, π/2).
/// β > 1 weights recall.
pub fn prd_f_beta(p: &[f64], q: &[f64], beta: f64, grid_points: usize) -> Result<f64> {
    validate_probability_histogram(p, "P")?;
    validate_probability_histogram(q, "Q")?;
    shared_bins(p, q)?;
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "PRD beta must be positive and finite, got {beta}"
        )));
    }
    if grid_points == 0 {
        return Err(Error::DegenerateInput("PRD grid must be non-empty".into()));
    }
    let beta_sq = beta * beta;
    let mut best = 0.0f64;
    for j in 1..=grid_points {
        let theta = std::f64::consts::FRAC_PI_2 * j as f64 / (grid_points + 1) as f64;
        let lambda = theta.tan();
        let mut precision = 0.0;
        let mut recall = 0.0;
        for (&pi, &qi) in p.iter().zip(q) {
            precision += (lambda * pi).min(qi);
            recall += pi.min(qi / lambda);
        }
        let denom = beta_sq * precision + recall;
        if denom > 0.0 {
            let f = (1.0 + beta_sq) * precision * recall / denom;
            if f > best {
                best = f;
            }
        }
    }
    Ok(best.clamp(0.0, 1.0))
}

/// KL(P ‖ Q) = Σ pᵢ ln(pᵢ/qᵢ) after adding ε to every bin of both
/// histograms and renormalizing. Non-negative; 0 iff P = Q post-smoothing.
pub fn kl_divergence(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64> {
    validate_probability_histogram(p, "P")?;
    validate_probability_histogram(q, "Q")?;
    shared_bins(p, q)?;
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "KL smoothing epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let smooth = |h: &[f64]| -> Vec<f64> {
        let sum: f64 = h.iter().map(|x| x + epsilon).sum();
        h.iter().map(|x| (x + epsilon) / sum).collect()
    };
    let ps = smooth(p);
    let qs = smooth(q);
    let kl: f64 = ps
        .iter()
        .zip(&qs)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    Ok(kl.max(0.0))
}

/// Cosine similarity between two nonnegative bin-count vectors (they need
/// not be normalized). In [0, 1] for nonnegative inputs; 1 iff
/// proportional.
pub fn histogram_cosine(p: &[f64], q: &[f64]) -> Result<f64> {
    shared_bins(p, q)?;
    for (h, name) in [(p, "P"), (q, "Q")] {
        if h.is_empty() {
            return Err(Error::InvalidHistogram(format!("{name} has no bins")));
        }
        if let Some(bad) = h.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidHistogram(format!(
                "{name} has invalid mass {bad}"
            )));
        }
    }
    let norm = |h: &[f64]| h.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (np, nq) = (norm(p), norm(q));
    if np == 0.0 || nq == 0.0 {
        return Err(Error::ZeroHistogram);
    }
    let dot: f64 = p.iter().zip(q).map(|(x, y)| x * y).sum();
    Ok((dot / (np * nq)).clamp(-1.0, 1.0))
}
