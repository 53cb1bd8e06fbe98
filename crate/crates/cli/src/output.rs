//! Result tables, their CSV/JSON files, and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// A flat table plus structured extras (fits, distances) that only the JSON form carries.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub extra: serde_json::Map<String, Value>,
    /// Set by `selftest`.
    pub passed: Option<bool>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn extra(&mut self, key: &str, value: impl Serialize) {
        self.extra.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.to_string(), cell_value(v)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = serde_json::Map::new();
        out.insert("rows".into(), Value::Array(rows));
        for (k, v) in &self.extra {
            out.insert(k.clone(), v.clone());
        }
        Value::Object(out)
    }
}

/// Numbers stay numbers in JSON; empty cells become null.
fn cell_value(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = s.parse::<i64>() {
        return json!(i);
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() => json!(f),
        _ => Value::String(s.to_string()),
    }
}

/// Full precision, so files round-trip.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct RunRecord<'a> {
    pub command: &'a str,
    pub argv: Vec<String>,
    pub config: &'a ExperimentConfig,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_seconds: f64,
}

/// Writes `<command>.<format>`, `<command>.config.toml` and `<command>.manifest.json`
/// into the output directory; returns their paths.
pub fn write_outputs(report: &Report, rec: &RunRecord, extra_files: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let dir = &rec.config.output.path;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let ext = match rec.config.output.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let data = dir.join(format!("{}.{ext}", rec.command));
    match rec.config.output.format {
        Format::Csv => write(&data, &report.to_csv()?)?,
        Format::Json => write(&data, &serde_json::to_string_pretty(&report.to_json())?)?,
    }
    let config_path = dir.join(format!("{}.config.toml", rec.command));
    write(&config_path, &rec.config.to_toml())?;

    let mut outputs = vec![data, config_path];
    outputs.extend(extra_files.iter().cloned());
    let manifest_path = dir.join(format!("{}.manifest.json", rec.command));
    let manifest = json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": rec.command,
        "argv": rec.argv,
        "seed": rec.config.run.seed,
        "threads": rec.threads,
        "started_unix": rec.started_unix,
        "wall_time_seconds": rec.wall_seconds,
        "config": rec.config,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "passed": report.passed,
        "rerun": format!("skewlab --config {} {}", outputs[1].display(), rec.command),
    });
    write(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;
    outputs.push(manifest_path);
    Ok(outputs)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
