//! Golden-corpus CSV ingestion.
//!
//! Source files vary in column layout and label vocabulary, so
//! [`GoldenIngestSpec`] carries the column names, delimiter, and a
//! source-label -> golden-label map. Rows whose mapped label falls outside the declared golden set are
//! skipped and counted per source label; ingestion conserves rows:
//! `rows_in = records.len() + summary.skipped`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::config::GoldenConfig;

/// Everything needed to ingest one golden CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenIngestSpec {
    pub path: PathBuf,
    /// Field delimiter byte (e.g. `b','` or `b';'`).
    pub delimiter: u8,
    pub text_column: String,
    pub label_column: String,
    /// Source label -> golden label; identity for labels already in
    /// `emotion_set`.
    pub label_map: BTreeMap<String, String>,
    /// The declared golden label set; mapped labels outside it are skipped.
    pub emotion_set: Vec<String>,
}

impl GoldenIngestSpec {
    /// Build a spec from the golden section of a run configuration.
    pub fn from_config(golden: &GoldenConfig, path: impl Into<PathBuf>) -> Result<Self> {
        Ok(Self {
            path: path.into(),
            delimiter: golden.delimiter_byte()?,
            text_column: golden.text_column.clone(),
            label_column: golden.label_column.clone(),
            label_map: golden.label_map.clone(),
            emotion_set: golden.emotion_set.clone(),
        })
    }
}

/// One ingested golden text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub id: String,
    /// Label after mapping, guaranteed to be in the golden set.
    pub label: String,
    pub text: String,
    /// Unknown fields from record files, preserved on round-trip.
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Counts describing one ingestion run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// Data rows read (header excluded).
    pub rows_in: usize,
    pub records_out: usize,
    pub skipped: usize,
    /// Skip counts keyed by the source label that caused them.
    pub skipped_labels: BTreeMap<String, usize>,
}

/// Records plus conservation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub records: Vec<GoldenRecord>,
    pub summary: IngestSummary,
}

/// Ingest a golden CSV per `spec`.
pub fn ingest_golden(spec: &GoldenIngestSpec) -> Result<IngestOutcome> {
    let path_display = spec.path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .from_path(&spec.path)
        .map_err(|err| match err.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path_display.clone(),
                source: std::io::Error::other(err.to_string()),
            },
            _ => Error::Parse {
                path: path_display.clone(),
                detail: err.to_string(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|err| Error::Parse {
            path: path_display.clone(),
            detail: err.to_string(),
        })?
        .clone();
    let column_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ColumnNotFound {
                column: name.to_string(),
                path: path_display.clone(),
            })
    };
    let text_idx = column_index(&spec.text_column)?;
    let label_idx = column_index(&spec.label_column)?;

    let mut records = Vec::new();
    let mut rows_in = 0usize;
    let mut skipped_labels: BTreeMap<String, usize> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|err| Error::Parse {
            path: path_display.clone(),
            detail: err.to_string(),
        })?;
        rows_in += 1;
        let raw_label = row.get(label_idx).unwrap_or("").trim();
        let text = row.get(text_idx).unwrap_or("").to_string();
        let mapped = spec
            .label_map
            .get(raw_label)
            .map(String::as_str)
            .unwrap_or(raw_label);
        if spec.emotion_set.iter().any(|l| l == mapped) {
            records.push(GoldenRecord {
                id: format!("g-{rows_in:06}"),
                label: mapped.to_string(),
                text,
                extra: serde_json::Map::new(),
            });
        } else {
            *skipped_labels.entry(raw_label.to_string()).or_insert(0) += 1;
        }
    }

    let skipped: usize = skipped_labels.values().sum();
    debug_assert_eq!(rows_in, records.len() + skipped);
    if skipped > 0 {
        log::info!(
            "{path_display}: skipped {skipped}/{rows_in} rows with labels outside the golden set ({skipped_labels:?})"
        );
    }
    Ok(IngestOutcome {
        summary: IngestSummary {
            rows_in,
            records_out: records.len(),
            skipped,
            skipped_labels,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_for(path: PathBuf, delimiter: u8) -> GoldenIngestSpec {
        GoldenIngestSpec::from_config(
            &GoldenConfig {
                delimiter: (delimiter as char).to_string(),
                ..GoldenConfig::default()
            },
            path,
        )
        .unwrap()
    }

    #[test]
    fn three_row_csv_ingests_fully() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("golden.csv");
        std::fs::write(
            &path,
            "text,label\ni passed the exam,joy\nthe corridor was dark,fear\nshe held my hand,love\n",
        )
        .unwrap();
        let outcome = ingest_golden(&spec_for(path, b',')).unwrap();
        assert_eq!(outcome.summary.rows_in, 3);
        assert_eq!(outcome.summary.records_out, 3);
        assert_eq!(outcome.summary.skipped, 0);
        assert_eq!(outcome.records[0].label, "joy");
        assert_eq!(outcome.records[1].label, "fear");
        assert_eq!(outcome.records[2].label, "love");
        assert_eq!(outcome.records[0].id, "g-000001");
        assert_eq!(outcome.records[0].text, "i passed the exam");
    }

    #[test]
    fn unmapped_labels_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("golden.csv");
        std::fs::write(
            &path,
            "text,label\nfine,joy\nyuck,disgust\nugh,disgust\nok,sadness\n",
        )
        .unwrap();
        let outcome = ingest_golden(&spec_for(path, b',')).unwrap();
        assert_eq!(outcome.summary.rows_in, 4);
        assert_eq!(outcome.summary.records_out, 2);
        assert_eq!(outcome.summary.skipped, 2);
        assert_eq!(outcome.summary.skipped_labels["disgust"], 2);
        assert_eq!(
            outcome.summary.rows_in,
            outcome.summary.records_out + outcome.summary.skipped
        );
    }

    #[test]
    fn label_map_folds_source_labels_into_the_golden_set() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("golden.csv");
        std::fs::write(&path, "text,label\nwhat a day,happiness\nmeh,boredom\n").unwrap();
        let mut spec = spec_for(path, b',');
        spec.label_map.insert("happiness".into(), "joy".into());
        let outcome = ingest_golden(&spec).unwrap();
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.records[0].label, "joy");
        assert_eq!(outcome.summary.skipped_labels["boredom"], 1);
    }

    #[test]
    fn semicolon_delimiter_matches_comma_result() {
        let dir = tempfile::tempdir().unwrap();
        let comma = dir.path().join("comma.csv");
        let semi = dir.path().join("semi.csv");
        std::fs::write(&comma, "text,label\nhello there,joy\nwhy me,sadness\n").unwrap();
        std::fs::write(&semi, "text;label\nhello there;joy\nwhy me;sadness\n").unwrap();
        let from_comma = ingest_golden(&spec_for(comma, b',')).unwrap();
        let from_semi = ingest_golden(&spec_for(semi, b';')).unwrap();
        assert_eq!(from_comma.records, from_semi.records);
        assert_eq!(from_comma.summary, from_semi.summary);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("golden.csv");
        std::fs::write(&path, "content,label\nhi,joy\n").unwrap();
        let err = ingest_golden(&spec_for(path, b',')).unwrap_err();
        match err {
            Error::ColumnNotFound { column, .. } => assert_eq!(column, "text"),
            other => panic!("expected ColumnNotFound, got {other:?}"),
        }
    }

    #[test]
    fn column_order_does_not_matter() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("golden.csv");
        std::fs::write(&path, "label,text,weight\njoy,good morning,3\n").unwrap();
        let outcome = ingest_golden(&spec_for(path, b',')).unwrap();
        assert_eq!(outcome.records[0].text, "good morning");
        assert_eq!(outcome.records[0].label, "joy");
    }

    #[test]
    fn quoted_fields_with_delimiters_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("golden.csv");
        std::fs::write(&path, "text,label\n\"well, that happened\",surprise\n").unwrap();
        let outcome = ingest_golden(&spec_for(path, b',')).unwrap();
        assert_eq!(outcome.records[0].text, "well, that happened");
    }

    #[test]
    fn ragged_row_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("golden.csv");
        std::fs::write(&path, "text,label\nonly one field\n").unwrap();
        let err = ingest_golden(&spec_for(path, b',')).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err:?}");
    }
}
