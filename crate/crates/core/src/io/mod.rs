//! File formats: MATPOWER case files, the JSON snapshot and the measurement
//! CSV.

mod csv;
mod matpower;
mod snapshot;

pub use self::csv::{measurements_from_csv, measurements_to_csv, read_measurements_csv, write_measurements_csv};
pub use matpower::{parse_matpower, to_network, CaseFile, Table, MIN_BRANCH_COLUMNS, MIN_BUS_COLUMNS, MIN_GEN_COLUMNS};
pub use snapshot::{read_snapshot, snapshot_from_json, snapshot_to_json, write_snapshot, Snapshot, SNAPSHOT_SCHEMA_VERSION};

use crate::measurement::MeasurementError;
use crate::network::{NetworkError, PowerSystem};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{table} row {row}: {message}")]
    Case { table: String, row: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error("snapshot schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a network from a MATPOWER `.m` file or a JSON snapshot, chosen by
/// extension.
pub fn load_network(path: &Path) -> Result<PowerSystem, IoError> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(read_snapshot(path)?.network);
    }
    to_network(&parse_matpower(&read_text(path)?)?)
}
