//! Text-to-vector embedding behind a provider contract: a deterministic
//! offline mock provider and a remote embeddings-endpoint provider. All
//! downstream metrics operate on [`EmbeddedCorpus`] values produced here.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::run_bounded;
use crate::gateway::EmotionCategory;

/// A fixed-dimension embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// One embedded, labeled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSample {
    pub sample_id: String,
    pub label: EmotionCategory,
    pub provider_tag: String,
    pub vector: Vec<f64>,
    /// Unknown fields from record files, preserved on round-trip.
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// A labeled set of same-dimension embedding vectors — the substrate of
/// every metric computation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCorpus {
    pub samples: Vec<EmbeddedSample>,
    pub dim: usize,
    pub provider_tag: String,
}

impl EmbeddedCorpus {
    /// Assemble a corpus from per-sample records, checking dimensional
    /// consistency and sample-id uniqueness.
    pub fn from_samples(samples: Vec<EmbeddedSample>) -> Result<Self> {
        let dim = samples.first().map(|s| s.vector.len()).unwrap_or(0);
        let mut ids = std::collections::BTreeSet::new();
        for sample in &samples {
            if sample.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("embedded sample `{}`", sample.sample_id),
                    expected: dim,
                    found: sample.vector.len(),
                });
            }
            if !ids.insert(sample.sample_id.as_str()) {
                return Err(Error::DegenerateInput(format!(
                    "duplicate sample id `{}` in embedded corpus",
                    sample.sample_id
                )));
            }
        }
        let provider_tag = samples
            .first()
            .map(|s| s.provider_tag.clone())
            .unwrap_or_default();
        Ok(Self {
            samples,
            dim,
            provider_tag,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The distinct labels present, sorted.
    pub fn label_set(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .samples
            .iter()
            .map(|s| s.label.as_str().to_string())
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Raw vectors in sample order.
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.vector.clone()).collect()
    }
}

/// The embedding wire contract: a batch of texts in, one same-dimension
/// vector per text out, order preserved.
pub trait EmbeddingProvider: Sync {
    /// Embed one chunk of texts (callers batch and parallelize).
    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;

    /// Expected output dimension.
    fn dim(&self) -> usize;

    /// Identifier recorded on embedded corpora (provider + model + dim);
    /// metric runs warn when comparing corpora with different tags.
    fn tag(&self) -> String;
}

/// Embed `texts` with bounded request concurrency, preserving input order
/// and enforcing one same-dimension vector per text.
pub fn embed_batch(
    texts: &[String],
    provider: &dyn EmbeddingProvider,
    chunk_size: usize,
    in_flight: usize,
) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let chunks: Vec<&[String]> = texts.chunks(chunk_size.max(1)).collect();
    let results = run_bounded(&chunks, in_flight, |chunk| provider.embed_chunk(chunk));
    let mut vectors = Vec::with_capacity(texts.len());
    for (chunk, result) in chunks.iter().zip(results) {
        let embedded = result?;
        if embedded.len() != chunk.len() {
            return Err(Error::BackendUnavailable(format!(
                "provider returned {} vectors for {} texts",
                embedded.len(),
                chunk.len()
            )));
        }
        for values in embedded {
            if values.len() != provider.dim() {
                return Err(Error::DimensionMismatch {
                    context: "embedding batch".into(),
                    expected: provider.dim(),
                    found: values.len(),
                });
            }
            vectors.push(EmbeddingVector { values });
        }
    }
    Ok(vectors)
}

/// Scale `v` to unit Euclidean norm. The zero vector is returned unchanged
/// with the flag set (and a warning logged), since it has no direction.
pub fn l2_normalize(v: &[f64]) -> (Vec<f64>, bool) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        if !v.is_empty() {
            log::warn!("l2_normalize received a zero vector; returning it unchanged");
        }
        return (v.to_vec(), true);
    }
    (v.iter().map(|x| x / norm).collect(), false)
}

/// Deterministic offline embedding provider: each text maps to a
/// pseudorandom unit vector seeded by hash(seed, text), so distinct texts
/// land nearly orthogonal and reruns agree byte-for-byte across processes.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dim: usize,
}

impl MockEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields >= 8 bytes"));
        let mut rng = crate::rng::seeded(seed);
        // Standard gaussian coordinates via Box–Muller, then normalization:
        // uniformly distributed directions on the unit sphere.
        let mut values = Vec::with_capacity(self.dim);
        while values.len() < self.dim {
            let u1: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
            let u2: f64 = rng.gen();
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = 2.0 * std::f64::consts::PI * u2;
            values.push(radius * angle.cos());
            if values.len() < self.dim {
                values.push(radius * angle.sin());
            }
        }
        let (unit, _) = l2_normalize(&values);
        unit
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|text| self.embed_one(text)).collect())
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn tag(&self) -> String {
        format!("mock-embed:d{}", self.dim)
    }
}

/// Remote embeddings-endpoint provider (OpenAI-compatible JSON protocol):
/// `POST {base_url}/embeddings` with `model` and `input`, consuming
/// `data[i].embedding`.
#[derive(Debug)]
pub struct RemoteEmbedder {
    base_url: String,
    model: String,
    dim: usize,
    api_key_env: String,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        base_url: &str,
        model: &str,
        dim: usize,
        api_key_env: &str,
        timeout_ms: u64,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_millis(timeout_ms))
            .build()
            .map_err(|err| {
                Error::BackendUnavailable(format!("client construction failed: {err}"))
            })?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            dim,
            api_key_env: api_key_env.to_string(),
            client,
        })
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.api_key_env).map_err(|_| {
            Error::BackendUnavailable(format!(
                "environment variable `{}` is not set",
                self.api_key_env
            ))
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embeddings", self.base_url);
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let response = self
            .client
            .post(&url)
            .bearer_auth(self.api_key()?)
            .json(&body)
            .send()
            .map_err(|err| Error::BackendUnavailable(format!("request to {url} failed: {err}")))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|err| Error::BackendUnavailable(format!("reading response failed: {err}")))?;
        if !status.is_success() {
            return Err(Error::BackendUnavailable(format!(
                "HTTP {status} from {url}"
            )));
        }
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|err| {
            Error::BackendUnavailable(format!("malformed embeddings response: {err}"))
        })?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| Error::BackendUnavailable("response missing `data` array".into()))?;
        data.iter()
            .map(|item| {
                item["embedding"]
                    .as_array()
                    .map(|coords| coords.iter().filter_map(|x| x.as_f64()).collect::<Vec<_>>())
                    .ok_or_else(|| {
                        Error::BackendUnavailable("response item missing `embedding`".into())
                    })
            })
            .collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn tag(&self) -> String {
        format!("remote-embed:{}:d{}", self.model, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn l2_normalize_oracles() {
        let (unit, flagged) = l2_normalize(&[3.0, 4.0]);
        assert!(!flagged);
        assert!((unit[0] - 0.6).abs() < 1e-12);
        assert!((unit[1] - 0.8).abs() < 1e-12);

        let (same, flagged) = l2_normalize(&[1.0, 0.0]);
        assert!(!flagged);
        assert_eq!(same, vec![1.0, 0.0]);

        let (zero, flagged) = l2_normalize(&[0.0, 0.0]);
        assert!(flagged);
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn mock_embeddings_are_unit_norm_and_deterministic() {
        let provider = MockEmbedder::new(3, 32);
        let batch = embed_batch(&texts(&["hello", "hello", "world"]), &provider, 2, 4).unwrap();
        assert_eq!(batch.len(), 3);
        assert_eq!(batch[0], batch[1]);
        assert_ne!(batch[0], batch[2]);
        for vector in &batch {
            assert_eq!(vector.dim(), 32);
            let norm: f64 = vector.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        // Cross-instance agreement: a fresh provider with the same seed
        // reproduces the same vectors.
        let again = embed_batch(&texts(&["hello"]), &MockEmbedder::new(3, 32), 64, 1).unwrap();
        assert_eq!(again[0], batch[0]);
    }

    #[test]
    fn different_seed_changes_vectors() {
        let a = MockEmbedder::new(3, 16).embed_one("hello");
        let b = MockEmbedder::new(4, 16).embed_one("hello");
        assert_ne!(a, b);
    }

    #[test]
    fn embed_batch_preserves_order_across_chunks() {
        let provider = MockEmbedder::new(9, 8);
        let names: Vec<String> = (0..57).map(|i| format!("text-{i}")).collect();
        let chunked = embed_batch(&names, &provider, 5, 8).unwrap();
        let single = embed_batch(&names, &provider, 1000, 1).unwrap();
        assert_eq!(chunked, single);
        for (i, name) in names.iter().enumerate() {
            assert_eq!(chunked[i].values, provider.embed_one(name));
        }
    }

    #[test]
    fn empty_input_yields_empty_output() {
        let provider = MockEmbedder::new(9, 8);
        assert!(embed_batch(&[], &provider, 64, 8).unwrap().is_empty());
    }

    #[test]
    fn corpus_assembly_checks_dims_and_ids() {
        let sample = |id: &str, dim: usize| EmbeddedSample {
            sample_id: id.into(),
            label: EmotionCategory::new("joy"),
            provider_tag: "mock-embed:d2".into(),
            vector: vec![0.0; dim],
            extra: serde_json::Map::new(),
        };
        let ok = EmbeddedCorpus::from_samples(vec![sample("a", 2), sample("b", 2)]).unwrap();
        assert_eq!(ok.dim, 2);
        assert_eq!(ok.label_set(), vec!["joy".to_string()]);

        assert!(matches!(
            EmbeddedCorpus::from_samples(vec![sample("a", 2), sample("b", 3)]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            EmbeddedCorpus::from_samples(vec![sample("a", 2), sample("a", 2)]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn near_orthogonality_of_distinct_texts() {
        let provider = MockEmbedder::new(5, 256);
        let a = provider.embed_one("first text");
        let b = provider.embed_one("second text");
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!(
            dot.abs() < 0.25,
            "high-dimensional random unit vectors should be near-orthogonal, dot = {dot}"
        );
    }
}
