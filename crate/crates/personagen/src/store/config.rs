//! Run-configuration schema and loading.
//!
//! A single TOML document plus the seed fully determines a mock-backend
//! run: every knob a stage reads lives here, and loading validates the
//! whole document at once, reporting every violation rather than the
//! first.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::SUM_WARN_TOLERANCE;
use crate::error::{Error, Result};
use crate::gateway::RetryPolicy;
use crate::persona::{
    BackgroundTables, PersonaDistributions, RuleFilter, BACKGROUND_ATTRIBUTES, BASE_ATTRIBUTES,
};
use crate::scenario::{ScenarioConstraint, ScenarioDistributions};

/// The configuration document shipped with the crate, embedded at build
/// time so `default_config` works without any file on disk.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../config/default.toml");

/// Which implementation a backend-facing stage talks to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Mock => f.write_str("mock"),
            BackendKind::Remote => f.write_str("remote"),
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "remote" => Ok(BackendKind::Remote),
            other => Err(Error::Validation(vec![format!(
                "unknown backend kind `{other}` (expected `mock` or `remote`)"
            )])),
        }
    }
}

/// Text-generation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub model: String,
    pub temperature: f64,
    pub max_sentences: usize,
    /// Budget for resampling a rejected persona or scene before the slot
    /// fails with `ResampleCapExceeded`.
    pub resample_cap: u32,
    /// Upper bound on in-flight generation calls.
    pub parallelism: usize,
    pub retry: RetryPolicy,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model: "mock-chat".into(),
            temperature: 1.2,
            max_sentences: 2,
            resample_cap: 20,
            parallelism: 8,
            retry: RetryPolicy::default(),
        }
    }
}

/// LLM-judge knobs shared by plausibility validation and rubric scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    /// Judge model id; falls back to the generation model when omitted.
    pub model: Option<String>,
    /// A `judge` run fails once this fraction of rubric judgments stays
    /// unparsable after the reprompt.
    pub failure_rate_threshold: f64,
    /// Judge persona+scene combinations during generation (in addition to
    /// the persona-only judgment during persona construction).
    pub validate_scenes: bool,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            model: None,
            failure_rate_threshold: 0.2,
            validate_scenes: true,
        }
    }
}

impl JudgeConfig {
    /// The model the judge actually calls.
    pub fn model<'a>(&'a self, generation: &'a GenerationConfig) -> &'a str {
        self.model.as_deref().unwrap_or(&generation.model)
    }
}

/// Chat-backend endpoint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: String,
    /// Name of the environment variable holding the API key. The key
    /// itself never appears in configuration or on the command line.
    pub api_key_env: String,
    pub timeout_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            base_url: "http://127.0.0.1:8080/v1".into(),
            api_key_env: "PERSONAGEN_API_KEY".into(),
            timeout_ms: 30_000,
        }
    }
}

/// Embedding-provider settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub provider: BackendKind,
    pub model: String,
    pub dim: usize,
    /// Endpoint for the remote provider; falls back to `backend.base_url`
    /// when omitted.
    pub base_url: Option<String>,
    /// Texts per embeddings request.
    pub batch_size: usize,
    /// Upper bound on in-flight embedding requests.
    pub parallelism: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: BackendKind::Mock,
            model: "mock-embed".into(),
            dim: 32,
            base_url: None,
            batch_size: 64,
            parallelism: 8,
        }
    }
}

impl EmbeddingConfig {
    /// The endpoint the remote provider calls.
    pub fn base_url<'a>(&'a self, backend: &'a BackendConfig) -> &'a str {
        self.base_url.as_deref().unwrap_or(&backend.base_url)
    }
}

/// Metric-suite knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Shared k-means cluster count for diversity metrics.
    pub k_clusters: usize,
    /// Shared binning cluster count for similarity metrics.
    pub k_bins: usize,
    /// PRD F-beta weight.
    pub beta: f64,
    /// Histogram smoothing constant for KL divergence.
    pub epsilon: f64,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            k_clusters: 20,
            k_bins: 20,
            beta: 8.0,
            epsilon: 1e-6,
            kmeans_max_iters: 100,
            kmeans_tol: 1e-6,
        }
    }
}

/// Classification-harness knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub train_fraction: f64,
    pub stratified: bool,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            stratified: true,
            learning_rate: 0.1,
            l2: 1e-4,
            epochs: 500,
        }
    }
}

impl ClassifyConfig {
    /// Split specification under the given seed.
    pub fn split_spec(&self, seed: u64) -> crate::classify::SplitSpec {
        crate::classify::SplitSpec {
            train_fraction: self.train_fraction,
            seed,
            stratified: self.stratified,
        }
    }

    /// Training hyperparameters under the given seed.
    pub fn hyperparams(&self, seed: u64) -> crate::classify::Hyperparams {
        crate::classify::Hyperparams {
            learning_rate: self.learning_rate,
            l2: self.l2,
            epochs: self.epochs,
            seed,
        }
    }
}

/// Golden-corpus ingestion settings.
///
/// The golden label set is distinct from the generation `emotion_set`: a
/// run declares which of the two a stage uses, and `label_map` folds
/// source-file labels into the golden set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoldenConfig {
    pub emotion_set: Vec<String>,
    pub text_column: String,
    pub label_column: String,
    /// Single-byte field delimiter, e.g. "," or ";".
    pub delimiter: String,
    /// Source label -> golden label. Labels not mapped and not already in
    /// `emotion_set` are skipped and counted at ingestion.
    pub label_map: BTreeMap<String, String>,
}

impl Default for GoldenConfig {
    fn default() -> Self {
        Self {
            emotion_set: ["anger", "fear", "joy", "love", "sadness", "surprise"]
                .into_iter()
                .map(String::from)
                .collect(),
            text_column: "text".into(),
            label_column: "label".into(),
            delimiter: ",".into(),
            label_map: BTreeMap::new(),
        }
    }
}

impl GoldenConfig {
    /// The configured delimiter as a byte.
    pub fn delimiter_byte(&self) -> Result<u8> {
        match self.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ => Err(Error::Validation(vec![format!(
                "golden.delimiter must be a single byte, got `{}`",
                self.delimiter
            )])),
        }
    }
}

/// Persona sampling configuration: base distributions, background tables,
/// and the rule filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSection {
    pub base: PersonaDistributions,
    pub background: BackgroundTables,
    #[serde(default)]
    pub filter: RuleFilter,
}

/// Scenario sampling configuration: element/style distributions and
/// optional restrictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub elements: ScenarioDistributions,
    #[serde(default)]
    pub constraint: ScenarioConstraint,
}

fn default_seed() -> u64 {
    42
}

fn default_samples_per_emotion() -> usize {
    500
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Emotion categories a generation run covers.
    pub emotion_set: Vec<String>,
    #[serde(default = "default_samples_per_emotion")]
    pub samples_per_emotion: usize,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub judge: JudgeConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub golden: GoldenConfig,
    pub persona: PersonaSection,
    pub scenario: ScenarioSection,
}

impl RunConfig {
    /// Every configured attribute's category labels, for cross-reference
    /// checks (rule filters, scenario restrictions).
    pub fn category_sets(&self) -> BTreeMap<String, Vec<String>> {
        let mut sets = BTreeMap::new();
        for attr in BASE_ATTRIBUTES {
            let dist = self.persona.base.get(attr).expect("base attribute");
            sets.insert(
                attr.to_string(),
                dist.labels().map(String::from).collect::<Vec<_>>(),
            );
        }
        for attr in BACKGROUND_ATTRIBUTES {
            let table = self
                .persona
                .background
                .get(attr)
                .expect("background attribute");
            let mut labels: Vec<String> = table.default.labels().map(String::from).collect();
            for (_, dist) in &table.rows {
                labels.extend(dist.labels().map(String::from));
            }
            labels.sort();
            labels.dedup();
            sets.insert(attr.to_string(), labels);
        }
        sets
    }

    /// Every validation problem in the document. Empty means valid.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();

        if self.emotion_set.is_empty() {
            problems.push("emotion_set must list at least one emotion".into());
        }
        problems.extend(duplicate_problems("emotion_set", &self.emotion_set));
        if self.samples_per_emotion == 0 {
            problems.push("samples_per_emotion must be at least 1".into());
        }

        let g = &self.generation;
        if g.model.is_empty() {
            problems.push("generation.model must not be empty".into());
        }
        if !g.temperature.is_finite() || !(0.0..=2.0).contains(&g.temperature) {
            problems.push(format!(
                "generation.temperature {} outside [0, 2]",
                g.temperature
            ));
        }
        if g.max_sentences == 0 {
            problems.push("generation.max_sentences must be at least 1".into());
        }
        if g.resample_cap == 0 {
            problems.push("generation.resample_cap must be at least 1".into());
        }
        if g.parallelism == 0 {
            problems.push("generation.parallelism must be at least 1".into());
        }
        if g.retry.max_attempts == 0 {
            problems.push("generation.retry.max_attempts must be at least 1".into());
        }

        let j = &self.judge;
        if !j.failure_rate_threshold.is_finite() || !(0.0..=1.0).contains(&j.failure_rate_threshold)
        {
            problems.push(format!(
                "judge.failure_rate_threshold {} outside [0, 1]",
                j.failure_rate_threshold
            ));
        }

        if self.backend.kind == BackendKind::Remote {
            if self.backend.base_url.is_empty() {
                problems.push("backend.base_url must be set for the remote backend".into());
            }
            if self.backend.api_key_env.is_empty() {
                problems.push("backend.api_key_env must be set for the remote backend".into());
            }
        }

        let e = &self.embedding;
        if e.dim == 0 {
            problems.push("embedding.dim must be at least 1".into());
        }
        if e.batch_size == 0 {
            problems.push("embedding.batch_size must be at least 1".into());
        }
        if e.parallelism == 0 {
            problems.push("embedding.parallelism must be at least 1".into());
        }
        if e.provider == BackendKind::Remote && e.base_url(&self.backend).is_empty() {
            problems.push("embedding.base_url must be set for the remote provider".into());
        }

        let m = &self.metrics;
        if m.k_clusters == 0 {
            problems.push("metrics.k_clusters must be at least 1".into());
        }
        if m.k_bins == 0 {
            problems.push("metrics.k_bins must be at least 1".into());
        }
        if !m.beta.is_finite() || m.beta <= 0.0 {
            problems.push(format!("metrics.beta {} must be positive", m.beta));
        }
        if !m.epsilon.is_finite() || m.epsilon <= 0.0 {
            problems.push(format!("metrics.epsilon {} must be positive", m.epsilon));
        }
        if m.kmeans_max_iters == 0 {
            problems.push("metrics.kmeans_max_iters must be at least 1".into());
        }
        if !m.kmeans_tol.is_finite() || m.kmeans_tol <= 0.0 {
            problems.push(format!(
                "metrics.kmeans_tol {} must be positive",
                m.kmeans_tol
            ));
        }

        let c = &self.classify;
        if !c.train_fraction.is_finite() || !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
            problems.push(format!(
                "classify.train_fraction {} outside (0, 1)",
                c.train_fraction
            ));
        }
        if !c.learning_rate.is_finite() || c.learning_rate <= 0.0 {
            problems.push(format!(
                "classify.learning_rate {} must be positive",
                c.learning_rate
            ));
        }
        if !c.l2.is_finite() || c.l2 < 0.0 {
            problems.push(format!("classify.l2 {} must be non-negative", c.l2));
        }
        if c.epochs == 0 {
            problems.push("classify.epochs must be at least 1".into());
        }

        let gold = &self.golden;
        if gold.emotion_set.is_empty() {
            problems.push("golden.emotion_set must list at least one label".into());
        }
        problems.extend(duplicate_problems("golden.emotion_set", &gold.emotion_set));
        if let Err(Error::Validation(mut delim_problems)) = gold.delimiter_byte() {
            problems.append(&mut delim_problems);
        }
        for (source, target) in &gold.label_map {
            if !gold.emotion_set.iter().any(|l| l == target) {
                problems.push(format!(
                    "golden.label_map maps `{source}` to `{target}`, which is not in golden.emotion_set"
                ));
            }
        }

        problems.extend(self.persona.base.problems());
        problems.extend(self.persona.background.problems());
        problems.extend(self.persona.filter.problems(&self.category_sets()));
        problems.extend(self.scenario.elements.problems());
        problems.extend(self.scenario.constraint.problems(&self.scenario.elements));

        problems
    }

    /// Renormalize every probability list; returns the worst raw-sum
    /// deviation encountered.
    pub fn normalize(&mut self) -> f64 {
        let mut worst = self.persona.base.normalize();
        worst = worst.max(self.persona.background.normalize());
        worst.max(self.scenario.elements.normalize())
    }
}

fn duplicate_problems(field: &str, labels: &[String]) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut problems = Vec::new();
    for label in labels {
        if label.is_empty() {
            problems.push(format!("{field} contains an empty label"));
        } else if !seen.insert(label.as_str()) {
            problems.push(format!("{field} lists `{label}` more than once"));
        }
    }
    problems
}

/// Parse and validate a configuration document. `origin` names the source
/// in errors and warnings (a path, or `<embedded default>`).
pub fn parse_config(raw: &str, origin: &str) -> Result<RunConfig> {
    let mut config: RunConfig = toml::from_str(raw).map_err(|err| Error::Parse {
        path: origin.to_string(),
        detail: err.to_string(),
    })?;
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let worst = config.normalize();
    if worst > SUM_WARN_TOLERANCE {
        log::warn!(
            "{origin}: probability lists renormalized (worst raw-sum deviation {worst:.3e})"
        );
    }
    Ok(config)
}

/// Load, parse, and validate a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|err| Error::io(path, err))?;
    parse_config(&raw, &path.display().to_string())
}

/// The validated embedded default configuration.
pub fn default_config() -> RunConfig {
    parse_config(DEFAULT_CONFIG_TOML, "<embedded default>")
        .expect("embedded default configuration is valid")
}
