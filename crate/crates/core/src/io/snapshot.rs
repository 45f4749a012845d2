use super::{read_text, write_text, IoError};
use crate::measurement::{Measurement, MeasurementSet};
use crate::network::{Branch, Bus, Generator, PowerSystem};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SNAPSHOT_SCHEMA_VERSION: u64 = 1;

/// A network with optional measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub network: PowerSystem,
    pub measurements: Option<MeasurementSet>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
}

#[derive(Serialize, Deserialize)]
struct MeasurementDoc {
    seed: Option<u64>,
    measurements: Vec<Measurement>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    schema_version: u64,
    network: NetworkDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measurements: Option<MeasurementDoc>,
}

#[derive(Deserialize)]
struct VersionOnly {
    schema_version: u64,
}

pub fn snapshot_to_json(network: &PowerSystem, measurements: Option<&MeasurementSet>) -> String {
    let doc = Document {
        schema_version: SNAPSHOT_SCHEMA_VERSION,
        network: NetworkDoc {
            base_mva: network.base_mva(),
            buses: network.buses().to_vec(),
            branches: network.branches().to_vec(),
            generators: network.generators().to_vec(),
        },
        measurements: measurements.map(|m| MeasurementDoc {
            seed: m.seed,
            measurements: m.measurements().to_vec(),
        }),
    };
    serde_json::to_string_pretty(&doc).expect("snapshot serializes")
}

pub fn snapshot_from_json(text: &str) -> Result<Snapshot, IoError> {
    let v: VersionOnly = serde_json::from_str(text).map_err(|e| IoError::Malformed(e.to_string()))?;
    if v.schema_version != SNAPSHOT_SCHEMA_VERSION {
        return Err(IoError::SchemaVersion {
            found: v.schema_version,
            expected: SNAPSHOT_SCHEMA_VERSION,
        });
    }
    let doc: Document = serde_json::from_str(text).map_err(|e| IoError::Malformed(e.to_string()))?;
    let n = doc.network;
    let network = PowerSystem::new(n.base_mva, n.buses, n.branches, n.generators)?;
    let measurements = match doc.measurements {
        Some(m) => {
            let mut set = MeasurementSet::new(m.measurements)?;
            set.seed = m.seed;
            set.validate_against(&network)?;
            Some(set)
        }
        None => None,
    };
    Ok(Snapshot { network, measurements })
}

pub fn write_snapshot(path: &Path, network: &PowerSystem, measurements: Option<&MeasurementSet>) -> Result<(), IoError> {
    write_text(path, &snapshot_to_json(network, measurements))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, IoError> {
    snapshot_from_json(&read_text(path)?)
}
