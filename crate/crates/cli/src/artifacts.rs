//! Output-directory plumbing: hashed artifact files and the run manifest.
//!
//! Every artifact embeds the config hash (CSV as a leading comment line,
//! JSON as a `config_hash` field) and is recorded in `manifest.json`
//! with its SHA-256, which `replay` later verifies byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;

/// Version stamp of the artifact layout; `replay` refuses manifests from
/// another version.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
}

/// The run manifest: what ran, on what configuration, producing which
/// bytes, and how long each stage took. Timings are informational; the
/// artifact hashes are the replay contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: u32,
    pub subcommand: String,
    /// The model spec on its own, for quick inspection.
    pub spec: serde_json::Value,
    /// The complete effective config (seed override applied).
    pub config: serde_json::Value,
    pub config_hash: String,
    pub base_seed: u64,
    pub workers: usize,
    pub output_format: String,
    pub timings_seconds: BTreeMap<String, f64>,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Collects artifacts for one run directory and writes the manifest.
pub struct RunDir {
    root: PathBuf,
    records: Vec<ArtifactRecord>,
    timings: BTreeMap<String, f64>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<RunDir, String> {
        std::fs::create_dir_all(root)
            .map_err(|e| format!("cannot create output directory {}: {e}", root.display()))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            records: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    /// Write one artifact and record its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), String> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.records.push(ArtifactRecord {
            name: name.to_string(),
            sha256: hex(&hasher.finalize()),
        });
        Ok(())
    }

    pub fn record_timing(&mut self, stage: &str, seconds: f64) {
        self.timings.insert(stage.to_string(), seconds);
    }

    /// Write `manifest.json` and hand back the records for reporting.
    pub fn finish(
        self,
        subcommand: &str,
        config_value: &serde_json::Value,
        config_hash: &str,
        base_seed: u64,
        workers: usize,
        output_format: &str,
    ) -> Result<Manifest, String> {
        let manifest = Manifest {
            artifact_version: ARTIFACT_VERSION,
            subcommand: subcommand.to_string(),
            spec: config_value.get("model").cloned().unwrap_or(serde_json::Value::Null),
            config: config_value.clone(),
            config_hash: config_hash.to_string(),
            base_seed,
            workers,
            output_format: output_format.to_string(),
            timings_seconds: self.timings,
            artifacts: self.records,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| format!("manifest serialization: {e}"))?;
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        Ok(manifest)
    }
}

/// Deterministic shortest-roundtrip float formatting shared by every
/// tabular artifact, so replays are byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// A tabular artifact: CSV with a hash comment, or a JSON document with
/// the hash as a field, depending on the requested format.
pub enum TableFormat {
    Csv,
    Json,
}

/// Render rows of (column -> value) into the requested format. Columns
/// are fixed by the caller and values are already formatted strings for
/// CSV; the JSON side gets raw numbers for machine use.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn render(&self, format: &TableFormat, config_hash: &str) -> Vec<u8> {
        match format {
            TableFormat::Csv => {
                let mut out = String::new();
                out.push_str(&format!("# config_hash {config_hash}\n"));
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out.into_bytes()
            }
            TableFormat::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let mut object = serde_json::Map::new();
                        for (name, &v) in self.columns.iter().zip(row) {
                            object.insert(
                                (*name).to_string(),
                                serde_json::Number::from_f64(v)
                                    .map(serde_json::Value::Number)
                                    .unwrap_or(serde_json::Value::Null),
                            );
                        }
                        serde_json::Value::Object(object)
                    })
                    .collect();
                let doc = serde_json::json!({
                    "config_hash": config_hash,
                    "columns": self.columns,
                    "rows": rows,
                });
                let mut bytes = serde_json::to_vec_pretty(&doc).expect("JSON values serialize");
                bytes.push(b'\n');
                bytes
            }
        }
    }

    /// File extension for the format.
    pub fn extension(format: &TableFormat) -> &'static str {
        match format {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }
}

/// Serialize a JSON report with the config hash injected as the first
/// field (serde_json keeps object keys sorted, so injection is by key).
pub fn report_bytes<T: Serialize>(report: &T, config_hash: &str) -> Result<Vec<u8>, String> {
    let mut value = serde_json::to_value(report).map_err(|e| format!("report: {e}"))?;
    match &mut value {
        serde_json::Value::Object(map) => {
            map.insert(
                "config_hash".to_string(),
                serde_json::Value::String(config_hash.to_string()),
            );
        }
        other => {
            let mut map = serde_json::Map::new();
            map.insert(
                "config_hash".to_string(),
                serde_json::Value::String(config_hash.to_string()),
            );
            map.insert("report".to_string(), other.clone());
            value = serde_json::Value::Object(map);
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&value).map_err(|e| format!("report: {e}"))?;
    bytes.push(b'\n');
    Ok(bytes)
}
