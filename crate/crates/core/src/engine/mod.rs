//! Extraction loops over a [`ModelClient`].

mod client;
mod record;
mod recovery;

pub use client::{
    prompt_key, read_transcript, ClientError, CompletionRequest, FnClient, HttpClient, ModelClient,
    ReplayClient, TranscriptEntry,
};
pub use record::{
    parse_record_lines, record_from_model_object, values_match, AttrValue, ExtractedRecord,
    ParsedLine, RecordError,
};
pub use recovery::{run_session, Interrupted, RecoverySession};

use crate::prompt::{build_cell_prompt, build_prompt, PromptOptions};
use crate::schema::{ExtractionSchema, SchemaMode};
use crate::table::{detect_target_cells, CellRef, DetectorPolicy, GridTable, SourceTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub prompt: PromptOptions,
    pub detector: DetectorPolicy,
    /// Reprompt budget per table; `None` means one per target.
    pub max_reprompts: Option<usize>,
    /// Consecutive fruitless calls at one cell before it is marked failed.
    pub no_progress_limit: usize,
    pub max_tokens: usize,
    pub stop: Vec<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            prompt: PromptOptions::default(),
            detector: DetectorPolicy::NumericCells,
            max_reprompts: None,
            no_progress_limit: 2,
            max_tokens: 2048,
            stop: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("table {0} has no target cells")]
    NoTargets(String),
    #[error("schema mode does not fit this extraction")]
    WrongMode,
    #[error(transparent)]
    Interrupted(#[from] Box<Interrupted>),
    #[error("model call failed: {0}")]
    Client(#[from] ClientError),
    #[error("page {page}: unusable completion ({reason})")]
    MalformedPage {
        page: String,
        reason: String,
        transcript: Vec<TranscriptEntry>,
    },
}

/// Describe every target cell of `grid` with one prompt, re-prompting from
/// the point of deviation whenever the model drifts from detector order.
pub fn run_table_extraction(
    table: &SourceTable,
    grid: &GridTable,
    schema: &ExtractionSchema,
    client: &dyn ModelClient,
    config: &EngineConfig,
) -> Result<RecoverySession, EngineError> {
    if schema.mode != SchemaMode::Cell {
        return Err(EngineError::WrongMode);
    }
    let targets = detect_target_cells(grid, &config.detector);
    if targets.is_empty() {
        return Err(EngineError::NoTargets(table.id.clone()));
    }
    let bundle = build_prompt(table, Some(grid), schema, targets.first(), &config.prompt);
    run_session(&table.id, bundle.prefix(), targets, schema, client, config)
        .map_err(|e| EngineError::Interrupted(Box::new(e)))
}

#[derive(Debug, Clone, Default)]
pub struct CellByCellOutcome {
    /// One per target, in target order; failures carry `failed`.
    pub records: Vec<ExtractedRecord>,
    pub transcript: Vec<TranscriptEntry>,
    /// Targets whose completion could not be used, with the reason.
    pub malformed: Vec<(CellRef, String)>,
    pub calls: usize,
}

/// Query each target separately over the condensed table.
pub fn run_cell_by_cell(
    table: &SourceTable,
    grid: &GridTable,
    schema: &ExtractionSchema,
    client: &dyn ModelClient,
    config: &EngineConfig,
) -> Result<CellByCellOutcome, EngineError> {
    if schema.mode != SchemaMode::Cell {
        return Err(EngineError::WrongMode);
    }
    let mut outcome = CellByCellOutcome::default();
    for target in detect_target_cells(grid, &config.detector) {
        let bundle = build_cell_prompt(table, grid, schema, &target, &config.prompt)
            .expect("detected cells belong to the grid");
        let request = CompletionRequest {
            prompt: bundle.text(),
            stop: config.stop.clone(),
            max_tokens: config.max_tokens,
        };
        let entry = match client.call(&request) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("{}: cell ({}, {}): {e}", table.id, target.row, target.col);
                outcome.malformed.push((target.clone(), e.to_string()));
                outcome
                    .records
                    .push(failed_record(&target, schema, &table.id));
                continue;
            }
        };
        outcome.calls += 1;
        let generated = format!("{}{}", bundle.initial_stub, entry.completion);
        let first_line = generated.lines().next().unwrap_or_default();
        let parsed = parse_record_lines(first_line, schema).into_iter().next();
        match parsed {
            Some(ParsedLine::Record(mut record)) => {
                if !record
                    .value
                    .as_deref()
                    .is_some_and(|v| values_match(v, &target.value_text))
                {
                    log::warn!(
                        "{}: cell ({}, {}) answered with value {:?}",
                        table.id,
                        target.row,
                        target.col,
                        record.value
                    );
                }
                record.table = Some(table.id.clone());
                record.cell = Some(target.clone());
                outcome.records.push(record);
            }
            other => {
                let reason = match other {
                    Some(ParsedLine::Malformed { reason, .. }) => reason.to_string(),
                    _ => "empty completion".to_string(),
                };
                outcome.malformed.push((target.clone(), reason));
                outcome
                    .records
                    .push(failed_record(&target, schema, &table.id));
            }
        }
        outcome.transcript.push(entry);
    }
    Ok(outcome)
}

fn failed_record(cell: &CellRef, schema: &ExtractionSchema, table_id: &str) -> ExtractedRecord {
    let mut record = ExtractedRecord::failed_for(cell, schema);
    record.table = Some(table_id.to_string());
    record
}

#[derive(Debug, Clone)]
pub struct PageOutcome {
    pub record: ExtractedRecord,
    pub transcript: Vec<TranscriptEntry>,
}

/// Extract a page's attributes with a single call.
pub fn run_page_extraction(
    page: &SourceTable,
    schema: &ExtractionSchema,
    client: &dyn ModelClient,
    config: &EngineConfig,
) -> Result<PageOutcome, EngineError> {
    if schema.mode != SchemaMode::Page {
        return Err(EngineError::WrongMode);
    }
    let bundle = build_prompt(page, None, schema, None, &config.prompt);
    let request = CompletionRequest {
        prompt: bundle.text(),
        stop: config.stop.clone(),
        max_tokens: config.max_tokens,
    };
    let entry = client.call(&request)?;
    let generated = format!("{}{}", bundle.initial_stub, entry.completion);
    let transcript = vec![entry];
    let first_object = serde_json::Deserializer::from_str(generated.trim_start())
        .into_iter::<serde_json::Value>()
        .next();
    let parsed = match first_object {
        Some(Ok(value)) => {
            record_from_model_object(&value, schema, generated.lines().next().unwrap_or_default())
                .map_err(|e| e.to_string())
        }
        Some(Err(e)) => Err(e.to_string()),
        None => Err("empty completion".to_string()),
    };
    match parsed {
        Ok(mut record) => {
            record.table = Some(page.id.clone());
            Ok(PageOutcome { record, transcript })
        }
        Err(reason) => Err(EngineError::MalformedPage {
            page: page.id.clone(),
            reason,
            transcript,
        }),
    }
}
