//! CSV ingestion and output, and the versioned JSON model envelope.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{csv_columns, validate_instance, Dataset, Feature, Movement, RawRecord};

/// Version written into every model file; other versions are refused.
pub const FORMAT_VERSION: u32 = 1;

const CREATOR: &str = concat!("tmc ", env!("CARGO_PKG_VERSION"));

/// Upper bound on row diagnostics kept in one error.
const MAX_ROW_ERRORS: usize = 50;

/// Parses an observation CSV. Columns are matched by header name, so their
/// order is free; label cells may be empty only when `require_labels` is false.
pub fn read_dataset<R: Read>(reader: R, require_labels: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let expected: BTreeSet<&str> = csv_columns().into_iter().collect();
    let present: BTreeSet<&str> = header.iter().map(String::as_str).collect();
    let missing: Vec<String> = csv_columns()
        .into_iter()
        .filter(|c| !present.contains(c))
        .map(str::to_string)
        .collect();
    let extra: Vec<String> = header
        .iter()
        .filter(|h| !expected.contains(h.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() || present.len() != header.len() {
        return Err(Error::Header { missing, extra });
    }

    let mut instances = Vec::new();
    let mut errors = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(Error::Validation {
                    row: line,
                    field: "record".into(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let raw: RawRecord<'_> = header
            .iter()
            .zip(record.iter())
            .map(|(h, v)| (h.as_str(), Some(v)))
            .collect();
        match validate_instance(&raw, line, require_labels) {
            Ok(inst) => instances.push(inst),
            Err(e) if errors.len() < MAX_ROW_ERRORS => errors.push(e),
            Err(_) => {}
        }
    }
    if !errors.is_empty() {
        return Err(if errors.len() == 1 {
            errors.remove(0)
        } else {
            Error::Rows(errors)
        });
    }
    Dataset::new(instances)
}

pub fn ingest_csv(path: impl AsRef<Path>, require_labels: bool) -> Result<Dataset> {
    read_dataset(File::open(path)?, require_labels)
}

pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_columns())?;
    for inst in dataset.instances() {
        let mut row = vec![
            inst.key.intersection_id.clone(),
            inst.key.approach_id.clone(),
            inst.key.day_index.to_string(),
            inst.key.interval_index.to_string(),
        ];
        row.extend(Feature::ALL.iter().map(|&f| inst.features.get(f).to_string()));
        row.extend(
            Movement::ALL
                .iter()
                .map(|&m| inst.label(m).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(dataset, BufWriter::new(File::create(path)?))
}

pub fn to_csv_string(dataset: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Writes any serializable rows (with a header derived from field names).
pub fn write_rows<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<T> {
    pub format_version: u32,
    /// Tool and version that wrote the file. No timestamp, so repeated runs
    /// produce identical bytes.
    pub created: String,
    pub config: serde_json::Value,
    pub payload: T,
}

pub fn envelope_to_string<T: Serialize, C: Serialize>(payload: &T, config: &C) -> Result<String> {
    let env = Envelope {
        format_version: FORMAT_VERSION,
        created: CREATOR.to_string(),
        config: serde_json::to_value(config)?,
        payload,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

pub fn envelope_from_str<T: DeserializeOwned>(text: &str) -> Result<Envelope<T>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::argument("model file has no format_version"))?;
    if found != FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion {
            found: found.min(u32::MAX as u64) as u32,
            expected: FORMAT_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn save_model<T: Serialize, C: Serialize>(payload: &T, config: &C, path: impl AsRef<Path>) -> Result<()> {
    let text = envelope_to_string(payload, config)?;
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn load_model<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Envelope<T>> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    envelope_from_str(&text)
}
