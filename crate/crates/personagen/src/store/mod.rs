//! Persistence and ingestion: the run-configuration schema, line-delimited
//! persona/sample/embedding corpora, golden-data CSV ingestion, and report
//! files.

mod config;
mod golden;
mod records;
mod report;

pub use config::{
    default_config, load_config, parse_config, BackendConfig, BackendKind, ClassifyConfig,
    EmbeddingConfig, GenerationConfig, GoldenConfig, JudgeConfig, MetricsConfig, PersonaSection,
    RunConfig, ScenarioSection, DEFAULT_CONFIG_TOML,
};
pub use golden::{ingest_golden, GoldenIngestSpec, GoldenRecord, IngestOutcome, IngestSummary};
pub use records::{
    append_records, read_records, write_records, CorpusCheck, CorpusFile, ReadOutcome, RecordKind,
};
pub use report::{confusion_csv, pca_csv, write_json, write_text};
