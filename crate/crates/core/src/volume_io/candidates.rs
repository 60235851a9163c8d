use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::VolumeError;
use crate::table::{self, RowError};

/// One row of a candidates file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub scan_id: String,
    /// World position in mm.
    pub world_pos: [f64; 3],
    /// `Some(true)` for nodules, `Some(false)` for non-nodules, `None` when
    /// the file carries no `class` column.
    pub label: Option<bool>,
}

const PREFIX: [&str; 4] = ["seriesuid", "coordX", "coordY", "coordZ"];

/// Loads `seriesuid,coordX,coordY,coordZ[,class]` rows, preserving file order.
pub fn load_candidates(csv_path: &Path, labeled: bool) -> Result<Vec<CandidateRecord>, VolumeError> {
    let file = table::open(csv_path)?;
    parse_candidates(file, csv_path, labeled)
}

/// Same as [`load_candidates`] over any reader; `source` names it in errors.
pub fn parse_candidates<R: Read>(
    reader: R,
    source: &Path,
    labeled: bool,
) -> Result<Vec<CandidateRecord>, VolumeError> {
    let columns = if labeled { 5 } else { 4 };
    let rows = table::read_rows(reader, source, &PREFIX, columns)?;
    rows.iter()
        .map(|row| {
            let scan_id = row.fields[0].to_string();
            if scan_id.is_empty() {
                return Err(row.error(source, "empty seriesuid"));
            }
            let world_pos = [
                row.coord(1, "coordX", source)?,
                row.coord(2, "coordY", source)?,
                row.coord(3, "coordZ", source)?,
            ];
            let label = if labeled {
                Some(match &row.fields[4] {
                    "0" => false,
                    "1" => true,
                    other => return Err(row.error(source, format!("class must be 0 or 1, found {other:?}"))),
                })
            } else {
                None
            };
            Ok(CandidateRecord {
                scan_id,
                world_pos,
                label,
            })
        })
        .collect::<Result<_, RowError>>()
        .map_err(VolumeError::from)
}
