//! `parse` and `detect`: grid and target-cell dumps for single files.

use crate::io::{pretty, write_atomic};
use crate::Outcome;
use anyhow::{Context, Result};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use tablex_core::table::{
    detect_target_cells, parse_html_page, DetectorPolicy, SourceTable, TableFormat,
};

fn load(path: &Path, format: Option<TableFormat>) -> Result<SourceTable> {
    let format = match format {
        Some(f) => f,
        None => path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(TableFormat::from_extension)
            .with_context(|| {
                format!(
                    "cannot tell the format of {}; pass --format",
                    path.display()
                )
            })?,
    };
    let raw =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    Ok(SourceTable::new(id, format, raw)?)
}

fn parse_one(path: &Path, format: Option<TableFormat>) -> Result<Value> {
    let source = load(path, format)?;
    if source.format == TableFormat::Html {
        return Ok(
            json!({"source_id": source.id, "format": source.format, "nodes": parse_html_page(&source.raw)}),
        );
    }
    Ok(source.parse()?.to_debug_json())
}

fn detect_one(path: &Path, format: Option<TableFormat>) -> Result<Value> {
    let source = load(path, format)?;
    let grid = source.parse()?;
    let cells = detect_target_cells(&grid, &DetectorPolicy::NumericCells);
    Ok(json!({"source_id": source.id, "targets": cells}))
}

pub enum Inspect {
    Parse,
    Detect,
}

/// Dump each file; a file that fails is reported and the rest continue.
pub fn run_inspect(
    kind: Inspect,
    paths: &[PathBuf],
    format: Option<TableFormat>,
    out: Option<&Path>,
) -> Result<Outcome> {
    let mut outcome = Outcome::Success;
    let mut results = Vec::new();
    for path in paths {
        let result = match kind {
            Inspect::Parse => parse_one(path, format),
            Inspect::Detect => detect_one(path, format),
        };
        match result {
            Ok(v) => results.push(v),
            Err(e) => {
                log::error!("{}: {e:#}", path.display());
                results
                    .push(json!({"path": path.display().to_string(), "error": format!("{e:#}")}));
                outcome = Outcome::Partial;
            }
        }
    }
    let value = if results.len() == 1 {
        results.remove(0)
    } else {
        Value::Array(results)
    };
    let text = pretty(&value)?;
    match out {
        Some(out) => write_atomic(out, &text)?,
        None => print!("{text}"),
    }
    Ok(outcome)
}
