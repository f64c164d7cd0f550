//! Line-delimited dataset manifests.
//!
//! Line 1 is a header object carrying the schema name and version; every
//! following line is one [`DatasetRecord`] as JSON. Floats round-trip
//! exactly because serde_json emits shortest-exact representations.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::DatasetRecord;

pub const MANIFEST_SCHEMA: &str = "steribench.dataset";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest is empty (missing header line)")]
    MissingHeader,
    #[error("invalid manifest header: {0}")]
    BadHeader(String),
    #[error("unsupported schema '{schema}' version {version}")]
    UnsupportedSchema { schema: String, version: u32 },
    #[error("record {id}: {message}")]
    BadRecord { id: String, message: String },
    #[error("header declares {declared} records, found {found}")]
    RecordCountMismatch { declared: usize, found: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    records: usize,
    /// Free-form provenance (generator settings); ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    info: Option<serde_json::Value>,
}

pub fn save_manifest(records: &[DatasetRecord], path: &Path) -> Result<(), SchemaError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    write_manifest(records, &mut writer, None)
}

pub fn load_manifest(path: &Path) -> Result<Vec<DatasetRecord>, SchemaError> {
    let file = File::open(path)?;
    read_manifest(BufReader::new(file))
}

pub fn write_manifest<W: Write>(
    records: &[DatasetRecord],
    writer: &mut W,
    info: Option<serde_json::Value>,
) -> Result<(), SchemaError> {
    let header = Header {
        schema: MANIFEST_SCHEMA.to_string(),
        version: MANIFEST_VERSION,
        records: records.len(),
        info,
    };
    serde_json::to_writer(&mut *writer, &header)
        .map_err(|e| SchemaError::BadHeader(e.to_string()))?;
    writer.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut *writer, record).map_err(|e| SchemaError::BadRecord {
            id: record.id.to_string(),
            message: e.to_string(),
        })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<DatasetRecord>, SchemaError> {
    let mut lines = BufReader::new(reader).lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => return Err(SchemaError::MissingHeader),
    };
    let header: Header =
        serde_json::from_str(&header_line).map_err(|e| SchemaError::BadHeader(e.to_string()))?;
    if header.schema != MANIFEST_SCHEMA || header.version != MANIFEST_VERSION {
        return Err(SchemaError::UnsupportedSchema {
            schema: header.schema,
            version: header.version,
        });
    }
    let mut records = Vec::with_capacity(header.records);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // Recover the record id for the error message even when the full
        // record fails validation.
        let record: DatasetRecord = serde_json::from_str(&line).map_err(|e| {
            let id = serde_json::from_str::<serde_json::Value>(&line)
                .ok()
                .and_then(|v| v.get("id").cloned())
                .map(|v| v.to_string())
                .unwrap_or_else(|| format!("#{idx}"));
            SchemaError::BadRecord { id, message: e.to_string() }
        })?;
        records.push(record);
    }
    if records.len() != header.records {
        return Err(SchemaError::RecordCountMismatch {
            declared: header.records,
            found: records.len(),
        });
    }
    Ok(records)
}
