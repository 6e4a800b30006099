//! Crate-wide error type and result alias.

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode surfaced by the library.
///
/// Errors are grouped by the stage that raises them: sampling, backends,
/// judging, numerics, classification, and persistence. [`Error::exit_code`]
/// maps each variant onto the process exit-code contract used by the CLI
/// (0 success, 1 validation failure, 2 runtime failure).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A categorical distribution has no entries (or no remaining mass).
    #[error("distribution `{name}` has no entries with positive probability")]
    EmptyDistribution { name: String },

    /// Rule filtering or a scenario restriction removed every candidate.
    #[error("constraints left no valid choice for `{attribute}`: {detail}")]
    InfeasibleConstraints { attribute: String, detail: String },

    /// A candidate or rule references an attribute that is not configured.
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    /// Transport-level failure talking to an LLM or embedding endpoint.
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    /// The backend kept returning blank text.
    #[error("backend returned an empty completion after {attempts} attempt(s)")]
    EmptyCompletion { attempts: u32 },

    /// A judge completion could not be parsed even after a reprompt.
    #[error("unparsable judgment: {0}")]
    UnparsableJudgment(String),

    /// A slot exhausted its resample budget without producing a keepable item.
    #[error("slot {slot} exhausted {cap} resample attempt(s) without an accepted candidate")]
    ResampleCapExceeded { slot: String, cap: u32 },

    /// Too many rubric judgments failed to parse during a judging run.
    #[error("judge failure rate {failed}/{total} exceeds threshold {threshold}")]
    JudgeFailureRate {
        failed: usize,
        total: usize,
        threshold: f64,
    },

    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    /// An operation received fewer samples than it needs.
    #[error("insufficient samples for {context}: need at least {needed}, found {found}")]
    InsufficientSamples {
        context: String,
        needed: usize,
        found: usize,
    },

    /// Input is structurally unusable (e.g. all points identical for PCA).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A histogram argument has negative mass or does not sum to one.
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    /// A histogram argument is entirely zero.
    #[error("histogram has zero total mass")]
    ZeroHistogram,

    /// Training data contains a single class.
    #[error("training data contains only the class `{0}`")]
    DegenerateLabels(String),

    /// A label was encountered that the model or emotion set does not know.
    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    /// Two corpora were expected to share a label set but do not.
    #[error("label sets differ: {left:?} vs {right:?}")]
    LabelSetMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },

    /// A file failed to parse (config, CSV, …); `detail` carries location info.
    #[error("failed to parse {path}: {detail}")]
    Parse { path: String, detail: String },

    /// Configuration validation failed; every violation is listed.
    #[error("invalid configuration ({} problem(s)):\n  - {}", .0.len(), .0.join("\n  - "))]
    Validation(Vec<String>),

    /// An I/O operation failed; `path` names the file involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A record line failed to parse in strict mode.
    #[error("malformed record at {path}:{line}: {detail}")]
    MalformedRecord {
        path: String,
        line: usize,
        detail: String,
    },

    /// A required CSV column is absent from the header.
    #[error("column `{column}` not found in {path}")]
    ColumnNotFound { column: String, path: String },
}

impl Error {
    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code for this error: 1 for configuration/input validation
    /// problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) => 1,
            _ => 2,
        }
    }
}
