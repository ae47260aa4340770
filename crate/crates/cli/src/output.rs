//! Report envelopes: every file carries the tool version, the seed and the resolved config.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Settings;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn from_settings(s: &Settings) -> Result<Format, CliError> {
        match s.raw("format").unwrap_or("json") {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::usage(format!("unknown format {other:?} (json or csv)"))),
        }
    }
}

pub fn envelope(s: &Settings, result: impl Serialize) -> Result<Value, CliError> {
    let result = serde_json::to_value(result).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(json!({
        "tool": "bb84",
        "version": bb84_core::VERSION,
        "command": s.command(),
        "seed": s.raw("seed").and_then(|v| v.parse::<u64>().ok()),
        "config": s.echo(),
        "result": result,
    }))
}

/// '#' preamble shared by CSV files and code files.
pub fn preamble(s: &Settings) -> String {
    let mut out = format!("# bb84 {} {}\n", bb84_core::VERSION, s.command());
    for line in s.echo_text().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn out_path(s: &Settings) -> Option<PathBuf> {
    s.raw("out").map(PathBuf::from)
}

pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::runtime(e.to_string()))
        }
    }
}

pub fn write_json(s: &Settings, result: impl Serialize) -> Result<(), CliError> {
    let v = envelope(s, result)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    emit(out_path(s).as_deref(), &text)
}

pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::runtime(e.to_string()))
}

pub fn write_csv(s: &Settings, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let text = preamble(s) + &csv_text(header, rows)?;
    emit(out_path(s).as_deref(), &text)
}
