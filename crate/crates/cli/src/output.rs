//! Report envelopes and writers. JSON payloads carry a schema version and the
//! effective config; CSV is UTF-8 with LF line endings and a header row.
//! Floats are printed in shortest round-trip form in both formats, so the
//! numbers are identical across them.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use biped_core::error::{Error, Result};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

pub fn report_json<T: Serialize>(command: &str, config: &RunConfig, result: T) -> String {
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    };
    serde_json::to_string_pretty(&envelope).expect("serializable report")
}

pub fn error_json(err: &Error) -> String {
    let stage = err.stage().unwrap_or("run");
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "stage": stage,
        "error": err.to_string(),
    })
    .to_string()
}

/// Key/value rows for CSV emission of a flat JSON result. Nested objects and
/// arrays are flattened with dotted/indexed keys.
pub fn flatten_for_csv(value: &serde_json::Value, prefix: &str, rows: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_for_csv(v, &key, rows);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten_for_csv(v, &format!("{prefix}[{i}]"), rows);
            }
        }
        other => rows.push((prefix.to_string(), scalar_string(other))),
    }
}

fn scalar_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn csv_from_result<T: Serialize>(result: &T) -> String {
    let value = serde_json::to_value(result).expect("serializable result");
    let mut rows = Vec::new();
    flatten_for_csv(&value, "", &mut rows);
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

/// Write to `--out` or stdout.
pub fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Error::InvalidInput(format!("write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())
                .and_then(|_| {
                    if !content.ends_with('\n') {
                        lock.write_all(b"\n")
                    } else {
                        Ok(())
                    }
                })
                .map_err(|e| Error::InvalidInput(format!("write stdout: {e}")))
        }
    }
}

/// CSV table builder with a fixed header.
pub struct CsvTable {
    buf: String,
}

impl CsvTable {
    pub fn new(header: &str) -> Self {
        Self {
            buf: format!("{header}\n"),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Shortest round-trip float formatting (the `Display` impl for f64).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
