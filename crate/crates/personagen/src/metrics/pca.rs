//! 2D PCA projection of an embedded corpus, emitted as a plottable table.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embedding::{l2_normalize, EmbeddedCorpus};
use crate::error::{Error, Result};

/// One row of the plot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaPoint {
    pub sample_id: String,
    pub label: String,
    pub x: f64,
    pub y: f64,
}

/// Project vectors onto their top two principal components (mean-centered).
/// Deterministic: components are ordered by descending eigenvalue and each
/// component's sign is fixed by making its largest-magnitude coordinate
/// positive. Inputs with fewer than two dimensions are padded with a zero
/// second coordinate.
pub fn pca_project(vectors: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let n = vectors.len();
    if n < 3 {
        return Err(Error::InsufficientSamples {
            context: "PCA projection".into(),
            needed: 3,
            found: n,
        });
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "PCA projection".into(),
                expected: dim,
                found: v.len(),
            });
        }
    }
    if vectors.iter().all(|v| v == &vectors[0]) {
        return Err(Error::DegenerateInput(
            "PCA projection of identical points is undefined".into(),
        ));
    }

    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    // Order components by descending eigenvalue; break exact ties by the
    // original column index for determinism.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues of a real symmetric matrix are finite")
            .then(a.cmp(&b))
    });

    let component = |rank: usize| -> Vec<f64> {
        if rank >= dim {
            return vec![0.0; dim];
        }
        let col = eig.eigenvectors.column(order[rank]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let mut largest = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[largest].abs() {
                largest = i;
            }
        }
        if v[largest] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        v
    };
    let first = component(0);
    let second = component(1);

    Ok(vectors
        .iter()
        .map(|v| {
            let mut x = 0.0;
            let mut y = 0.0;
            for j in 0..dim {
                let c = v[j] - mean[j];
                x += c * first[j];
                y += c * second[j];
            }
            (x, y)
        })
        .collect())
}

/// The plot table for a corpus: each sample's id, label, and projected
/// coordinates. Projection happens in the same normalized space as the
/// cosine-based metrics.
pub fn pca_table(corpus: &EmbeddedCorpus) -> Result<Vec<PcaPoint>> {
    let unit: Vec<Vec<f64>> = corpus
        .samples
        .iter()
        .map(|s| l2_normalize(&s.vector).0)
        .collect();
    let coords = pca_project(&unit)?;
    Ok(corpus
        .samples
        .iter()
        .zip(coords)
        .map(|(sample, (x, y))| PcaPoint {
            sample_id: sample.sample_id.clone(),
            label: sample.label.as_str().to_string(),
            x,
            y,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::test_support::{corpus, jittered_blob};
    use super::*;
    use rand::Rng;

    #[test]
    fn projected_mean_is_origin() {
        let vectors = jittered_blob(&[3.0, -1.0, 2.0, 0.5], 40, 2.0, 6);
        let coords = pca_project(&vectors).unwrap();
        let (mx, my) = coords
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        assert!(mx.abs() / 40.0 < 1e-9);
        assert!(my.abs() / 40.0 < 1e-9);
    }

    #[test]
    fn collinear_points_have_no_second_component_variance() {
        // Points on a line through 8-dimensional space.
        let direction: Vec<f64> = (0..8).map(|j| (j as f64 + 1.0) / 8.0).collect();
        let vectors: Vec<Vec<f64>> = (0..12)
            .map(|i| direction.iter().map(|d| d * i as f64).collect())
            .collect();
        let coords = pca_project(&vectors).unwrap();
        let var_y: f64 = coords.iter().map(|(_, y)| y * y).sum::<f64>() / 12.0;
        assert!(var_y < 1e-18, "second component variance = {var_y}");
        // First coordinates spread out along the line.
        let var_x: f64 = coords.iter().map(|(x, _)| x * x).sum::<f64>() / 12.0;
        assert!(var_x > 1.0);
    }

    #[test]
    fn rigid_rotation_preserves_pairwise_distances() {
        let vectors = jittered_blob(&[0.0, 0.0, 0.0], 20, 1.0, 14);
        // A deterministic 3-D rotation about an oblique axis, built from
        // orthonormalized columns.
        let raw = DMatrix::from_row_slice(3, 3, &[0.6, 0.8, 0.1, -0.7, 0.5, 0.4, 0.2, -0.3, 0.9]);
        let qr = raw.qr();
        let q = qr.q();
        let rotated: Vec<Vec<f64>> = vectors
            .iter()
            .map(|v| {
                (0..3)
                    .map(|i| (0..3).map(|j| q[(i, j)] * v[j]).sum())
                    .collect()
            })
            .collect();
        let a = pca_project(&vectors).unwrap();
        let b = pca_project(&rotated).unwrap();
        for i in 0..vectors.len() {
            for j in (i + 1)..vectors.len() {
                let da = ((a[i].0 - a[j].0).powi(2) + (a[i].1 - a[j].1).powi(2)).sqrt();
                let db = ((b[i].0 - b[j].0).powi(2) + (b[i].1 - b[j].1).powi(2)).sqrt();
                assert!((da - db).abs() < 1e-6, "pair ({i},{j}): {da} vs {db}");
            }
        }
    }

    #[test]
    fn sign_convention_makes_projection_reproducible() {
        let vectors = jittered_blob(&[1.0, 2.0, 3.0], 15, 1.5, 25);
        let a = pca_project(&vectors).unwrap();
        let b = pca_project(&vectors).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_dimensional_input_pads_second_coordinate() {
        let vectors = vec![vec![0.0], vec![1.0], vec![4.0], vec![9.0]];
        let coords = pca_project(&vectors).unwrap();
        assert!(coords.iter().all(|&(_, y)| y == 0.0));
        assert!(coords.iter().any(|&(x, _)| x != 0.0));
    }

    #[test]
    fn degenerate_and_tiny_inputs_are_rejected() {
        assert!(matches!(
            pca_project(&vec![vec![1.0, 2.0]; 5]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            pca_project(&[vec![1.0], vec![2.0]]),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn pca_table_carries_ids_and_labels() {
        let mut rng = crate::rng::seeded(30);
        let entries: Vec<(String, String, Vec<f64>)> = (0..10)
            .map(|i| {
                let v: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                let label = if i % 2 == 0 { "joy" } else { "fear" };
                (format!("s-{i:06}"), label.to_string(), v)
            })
            .collect();
        let refs: Vec<(&str, &str, Vec<f64>)> = entries
            .iter()
            .map(|(id, label, v)| (id.as_str(), label.as_str(), v.clone()))
            .collect();
        let table = pca_table(&corpus(&refs)).unwrap();
        assert_eq!(table.len(), 10);
        assert_eq!(table[0].sample_id, "s-000000");
        assert_eq!(table[1].label, "fear");
    }
}
