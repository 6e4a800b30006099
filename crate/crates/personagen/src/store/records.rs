//! Line-delimited record files: one self-describing JSON record per line.
//!
//! Appends write each record with a single `write` call on an `O_APPEND`
//! handle, so concurrent writers interleave at line granularity and every
//! line stays parseable. Reads are lenient by default — malformed lines
//! are skipped and reported with their line numbers — with a strict mode
//! that aborts instead.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddedSample;
use crate::error::{Error, Result};
use crate::gateway::EmotionSample;
use crate::persona::Persona;

/// Result of a lenient read: parsed records plus `(line number, problem)`
/// entries for lines that failed to parse. Line numbers are 1-based.
#[derive(Debug)]
pub struct ReadOutcome<T> {
    pub records: Vec<T>,
    pub skipped: Vec<(usize, String)>,
}

fn write_lines<T: Serialize>(path: &Path, file: &mut File, records: &[T]) -> Result<()> {
    for record in records {
        let mut line = serde_json::to_string(record).map_err(|err| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(err),
        })?;
        line.push('\n');
        // One write call per record: the unit of interleaving under
        // concurrent appends is a whole line.
        file.write_all(line.as_bytes())
            .map_err(|err| Error::io(path, err))?;
    }
    file.flush().map_err(|err| Error::io(path, err))
}

/// Write `records` to `path`, replacing any existing content.
pub fn write_records<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|err| Error::io(path, err))?;
    write_lines(path, &mut file, records)
}

/// Append `records` to `path`, creating the file if needed.
pub fn append_records<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|err| Error::io(path, err))?;
    write_lines(path, &mut file, records)
}

/// Read every record in `path`. Blank lines are ignored. Malformed lines
/// are reported in [`ReadOutcome::skipped`], or abort the read with
/// [`Error::MalformedRecord`] when `strict` is set.
pub fn read_records<T: DeserializeOwned>(
    path: impl AsRef<Path>,
    strict: bool,
) -> Result<ReadOutcome<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|err| Error::io(path, err))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|err| Error::io(path, err))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(record) => records.push(record),
            Err(err) if strict => {
                return Err(Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: idx + 1,
                    detail: err.to_string(),
                });
            }
            Err(err) => skipped.push((idx + 1, err.to_string())),
        }
    }
    Ok(ReadOutcome { records, skipped })
}

/// The record type a corpus file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Persona,
    EmotionSample,
    Embedded,
}

/// A line-delimited record file with a declared record kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFile {
    pub path: PathBuf,
    pub record_kind: RecordKind,
}

/// Result of [`CorpusFile::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCheck {
    /// Records that parsed as the declared kind.
    pub records: usize,
    /// `(line, problem)` for lines that did not.
    pub skipped: Vec<(usize, String)>,
    /// Ids appearing more than once, sorted.
    pub duplicate_ids: Vec<String>,
}

impl CorpusCheck {
    /// Whether the file is fully well-formed.
    pub fn ok(&self) -> bool {
        self.skipped.is_empty() && self.duplicate_ids.is_empty()
    }
}

impl CorpusFile {
    pub fn new(path: impl Into<PathBuf>, record_kind: RecordKind) -> Self {
        Self {
            path: path.into(),
            record_kind,
        }
    }

    /// Parse every line as the declared kind and check id uniqueness.
    pub fn validate(&self, strict: bool) -> Result<CorpusCheck> {
        match self.record_kind {
            RecordKind::Persona => check_ids::<Persona>(&self.path, strict, |r| r.id.clone()),
            RecordKind::EmotionSample => {
                check_ids::<EmotionSample>(&self.path, strict, |r| r.id.clone())
            }
            RecordKind::Embedded => {
                check_ids::<EmbeddedSample>(&self.path, strict, |r| r.sample_id.clone())
            }
        }
    }
}

fn check_ids<T: DeserializeOwned>(
    path: &Path,
    strict: bool,
    id_of: impl Fn(&T) -> String,
) -> Result<CorpusCheck> {
    let outcome = read_records::<T>(path, strict)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut duplicates = std::collections::BTreeSet::new();
    for record in &outcome.records {
        let id = id_of(record);
        if !seen.insert(id.clone()) {
            duplicates.insert(id);
        }
    }
    Ok(CorpusCheck {
        records: outcome.records.len(),
        skipped: outcome.skipped,
        duplicate_ids: duplicates.into_iter().collect(),
    })
}
