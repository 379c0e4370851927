//! Machine-readable run records.
//!
//! Every command that computes something writes (or can write) a JSON record
//! holding the resolved configuration, the seed, and the results. Numbers in
//! `config`, `seed`, and `results` are reproducible from the invocation;
//! wall-clock data lives only under `runtime`, which `--omit-runtime` drops
//! so that two identical invocations produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::AppError;

#[derive(Serialize)]
pub struct RunRecord {
    pub command: &'static str,
    pub config: Value,
    pub seed: u64,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<Value>,
}

/// Volatile wall-clock section; `extra` carries per-command timing detail.
pub fn runtime_value(elapsed_secs: f64, extra: Value) -> Value {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let mut obj = serde_json::json!({
        "timestamp_unix_ms": timestamp,
        "elapsed_secs": elapsed_secs,
    });
    if let Value::Object(extra_map) = extra {
        obj.as_object_mut().unwrap().extend(extra_map);
    }
    obj
}

pub fn write_record(path: &Path, record: &RunRecord) -> Result<(), AppError> {
    let file = File::create(path).map_err(|e| AppError::file(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, record)
        .map_err(|e| AppError::file(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| AppError::file(path, e))?;
    w.flush().map_err(|e| AppError::file(path, e))
}
