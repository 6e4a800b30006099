//! Report serialization: structured JSON documents and plain CSV tables
//! for plotting.
//!
//! Float fields go through shortest-round-trip formatting in both formats,
//! so report bytes are deterministic for deterministic values.

use std::path::Path;

use serde::Serialize;

use crate::classify::EvalReport;
use crate::error::{Error, Result};
use crate::metrics::PcaPoint;

/// Write `value` as pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut body = serde_json::to_string_pretty(value).map_err(|err| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(err),
    })?;
    body.push('\n');
    std::fs::write(path, body).map_err(|err| Error::io(path, err))
}

/// Write pre-rendered text.
pub fn write_text(path: impl AsRef<Path>, content: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, content).map_err(|err| Error::io(path, err))
}

fn csv_to_string(build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    build(&mut writer).expect("in-memory csv write cannot fail");
    let bytes = writer
        .into_inner()
        .expect("in-memory csv flush cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// The 2-D projection table as CSV: `sample_id,label,x,y`.
pub fn pca_csv(points: &[PcaPoint]) -> String {
    csv_to_string(|writer| {
        for point in points {
            writer.serialize(point)?;
        }
        // Serializing zero rows emits no header; force it for empty tables.
        if points.is_empty() {
            writer.write_record(["sample_id", "label", "x", "y"])?;
        }
        Ok(())
    })
}

/// The confusion matrix as CSV: one row per true label, one column per
/// predicted label, values are counts.
pub fn confusion_csv(report: &EvalReport) -> String {
    csv_to_string(|writer| {
        let mut header = vec!["true_label".to_string()];
        header.extend(report.labels.iter().cloned());
        writer.write_record(&header)?;
        for (label, row) in report.labels.iter().zip(&report.confusion) {
            let mut record = vec![label.clone()];
            record.extend(row.iter().map(|count| count.to_string()));
            writer.write_record(&record)?;
        }
        Ok(())
    })
}
