//! Minimal LUNA16-style CSV reading shared by the candidate, prediction and
//! reference loaders. Every row error carries the 1-based file line.

use std::io::Read;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
#[error("{source_name}:{line}: {reason}")]
pub struct RowError {
    pub source_name: PathBuf,
    pub line: usize,
    pub reason: String,
}

/// A data row with its 1-based line number.
pub(crate) struct Row {
    pub line: usize,
    pub fields: csv::StringRecord,
}

impl Row {
    pub fn coord(&self, idx: usize, name: &str, src: &Path) -> Result<f64, RowError> {
        let raw = &self.fields[idx];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(self.error(src, format!("non-finite {name} {raw:?}"))),
            Err(_) => Err(self.error(src, format!("non-numeric {name} {raw:?}"))),
        }
    }

    pub fn error(&self, src: &Path, reason: impl Into<String>) -> RowError {
        RowError {
            source_name: src.to_path_buf(),
            line: self.line,
            reason: reason.into(),
        }
    }
}

/// Reads a headed CSV whose header must start with `prefix` and have exactly
/// `prefix.len() + extra` columns. Returns the data rows in file order.
pub(crate) fn read_rows<R: Read>(
    reader: R,
    src: &Path,
    prefix: &[&str],
    columns: usize,
) -> Result<Vec<Row>, RowError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| RowError {
            source_name: src.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if !header_seen {
            header_seen = true;
            let names: Vec<&str> = rec.iter().collect();
            if names.len() != columns || names[..prefix.len()] != *prefix {
                return Err(RowError {
                    source_name: src.to_path_buf(),
                    line,
                    reason: format!(
                        "expected a header starting with `{}` and {} columns, found `{}`",
                        prefix.join(","),
                        columns,
                        names.join(",")
                    ),
                });
            }
            continue;
        }
        if rec.len() != columns {
            return Err(RowError {
                source_name: src.to_path_buf(),
                line,
                reason: format!("expected {columns} columns, found {}", rec.len()),
            });
        }
        rows.push(Row { line, fields: rec });
    }
    if !header_seen {
        return Err(RowError {
            source_name: src.to_path_buf(),
            line: 1,
            reason: "missing header row".into(),
        });
    }
    Ok(rows)
}

pub(crate) fn open(path: &Path) -> Result<std::fs::File, RowError> {
    std::fs::File::open(path).map_err(|e| RowError {
        source_name: path.to_path_buf(),
        line: 0,
        reason: format!("cannot open: {e}"),
    })
}
