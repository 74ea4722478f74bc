//! `extract` and `distill-export`: run the engine over a dataset with a
//! worker pool, per-table outputs and a resumable manifest.

use crate::dataset::{load_dataset, Document, TableFile};
use crate::io::{approx_tokens, jsonl, jsonl_of, pretty, write_atomic};
use crate::manifest::{ModelInfo, RunManifest, RunOptions, TableEntry, TableStatus};
use crate::pool::run_pool;
use crate::Outcome;
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use tablex_core::engine::{
    run_cell_by_cell, run_page_extraction, run_table_extraction, EngineConfig, EngineError,
    ExtractedRecord, HttpClient, ModelClient, ReplayClient, TranscriptEntry,
};
use tablex_core::prompt::{build_cell_prompt, build_prompt};
use tablex_core::schema::{ExtractionSchema, SchemaMode};
use tablex_core::table::{
    condense_table, detect_target_cells, DetectorPolicy, GridTable, SourceTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// One prompt per table with error recovery.
    FullTable,
    /// One condensed prompt per target cell.
    PerCell,
    /// One prompt per HTML page.
    Page,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FullTable => "full-table",
            Mode::PerCell => "per-cell",
            Mode::Page => "page",
        }
    }
}

/// A configured model client plus its description for the manifest.
pub struct Model {
    pub client: Arc<dyn ModelClient>,
    pub info: ModelInfo,
}

impl Model {
    /// Replay a transcript when given, else the HTTP endpoint from the
    /// environment.
    pub fn from_args(replay: Option<&Path>) -> Result<Self> {
        if let Some(path) = replay {
            let client = ReplayClient::from_transcript_file(path)?;
            return Ok(Self {
                client: Arc::new(client),
                info: ModelInfo {
                    kind: "replay".into(),
                    name: path.display().to_string(),
                    endpoint: None,
                },
            });
        }
        let client = HttpClient::from_env()?;
        let info = ModelInfo {
            kind: "http".into(),
            name: client.model().to_string(),
            endpoint: Some(client.endpoint().to_string()),
        };
        Ok(Self {
            client: Arc::new(client),
            info,
        })
    }
}

/// Load a schema given as a file path or a bundled schema name.
pub fn load_schema(spec: &str) -> Result<ExtractionSchema> {
    let path = Path::new(spec);
    if path.is_file() {
        return ExtractionSchema::load(path).with_context(|| format!("loading schema {spec}"));
    }
    tablex_core::schema::bundled(spec)
        .with_context(|| format!("no schema file or bundled schema named `{spec}`"))
}

/// Per-table cell positions from an external detector: `{"doc/table_1": [[r, c], ...]}`.
pub fn load_positions(path: &Path) -> Result<BTreeMap<String, Vec<(usize, usize)>>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub struct ExtractSettings {
    pub dataset: PathBuf,
    pub schema_label: String,
    pub schema: ExtractionSchema,
    pub mode: Mode,
    pub engine: EngineConfig,
    pub out: PathBuf,
    pub workers: usize,
    pub dump_prompt: Option<PathBuf>,
    pub targets: Option<BTreeMap<String, Vec<(usize, usize)>>>,
    /// Also write teacher examples for distillation.
    pub distill: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistillationExample {
    pub input: String,
    pub output: String,
}

struct JobOutput {
    entry: TableEntry,
    files: Option<TableOutputs>,
}

struct TableOutputs {
    records: Vec<ExtractedRecord>,
    transcript: Vec<TranscriptEntry>,
    examples: Vec<DistillationExample>,
}

struct Job<'a> {
    doc: &'a Document,
    table: &'a TableFile,
}

fn table_path(out: &Path, id: &str, suffix: &str) -> PathBuf {
    out.join("tables").join(format!("{id}.{suffix}.jsonl"))
}

/// A record as the model would write it: value, type and attributes.
pub fn model_line(record: &ExtractedRecord) -> String {
    let mut value = record.to_json();
    if let Value::Object(obj) = &mut value {
        obj.shift_remove("table");
        obj.shift_remove("cell");
        obj.shift_remove("failed");
    }
    value.to_string()
}

fn costs(entry: &mut TableEntry, transcript: &[TranscriptEntry]) {
    entry.calls = transcript.len();
    entry.prompt_tokens = transcript.iter().map(|t| approx_tokens(&t.prompt)).sum();
    entry.completion_tokens = transcript
        .iter()
        .map(|t| approx_tokens(&t.completion))
        .sum();
}

fn dump(settings: &ExtractSettings, id: &str, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = &settings.dump_prompt {
        write_atomic(&dir.join(format!("{id}.prompt.json")), &pretty(value)?)?;
    }
    Ok(())
}

fn engine_config(settings: &ExtractSettings, id: &str) -> EngineConfig {
    let mut config = settings.engine.clone();
    if let Some(list) = settings.targets.as_ref().and_then(|t| t.get(id)) {
        config.detector = DetectorPolicy::ExternalList(list.clone());
    }
    config
}

fn run_job(job: &Job, settings: &ExtractSettings, client: &dyn ModelClient) -> JobOutput {
    let failed = |e: anyhow::Error| JobOutput {
        entry: TableEntry::failed(format!("{e:#}")),
        files: None,
    };
    let source = match job.table.load(&job.doc.context) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    let result = match settings.mode {
        Mode::Page => page_job(&source, settings, client),
        Mode::FullTable | Mode::PerCell => match source.parse() {
            Ok(grid) if settings.mode == Mode::FullTable => {
                full_table_job(&source, &grid, settings, client)
            }
            Ok(grid) => per_cell_job(&source, &grid, settings, client),
            Err(e) => {
                Err(anyhow::Error::new(e).context(format!("parsing {}", job.table.path.display())))
            }
        },
    };
    result.unwrap_or_else(failed)
}

fn full_table_job(
    source: &SourceTable,
    grid: &GridTable,
    settings: &ExtractSettings,
    client: &dyn ModelClient,
) -> Result<JobOutput> {
    let config = engine_config(settings, &source.id);
    let targets = detect_target_cells(grid, &config.detector);
    let bundle = build_prompt(
        source,
        Some(grid),
        &settings.schema,
        targets.first(),
        &config.prompt,
    );
    dump(
        settings,
        &source.id,
        &serde_json::json!({"bundle": bundle, "text": bundle.text()}),
    )?;
    let (session, error) =
        match run_table_extraction(source, grid, &settings.schema, client, &config) {
            Ok(session) => (session, None),
            Err(EngineError::NoTargets(_)) => {
                return Ok(JobOutput {
                    entry: TableEntry::new(TableStatus::Skipped),
                    files: Some(TableOutputs {
                        records: vec![],
                        transcript: vec![],
                        examples: vec![],
                    }),
                })
            }
            Err(EngineError::Interrupted(e)) => {
                let msg = e.error.to_string();
                (e.session, Some(msg))
            }
            Err(e) => return Err(e.into()),
        };
    let status = match &error {
        Some(_) if session.accepted.is_empty() => TableStatus::Failed,
        Some(_) => TableStatus::Partial,
        None if session.incomplete || session.failed_cells > 0 => TableStatus::Partial,
        None => TableStatus::Complete,
    };
    let mut entry = TableEntry::new(status);
    entry.targets = session.targets.len();
    entry.records = session.accepted.len();
    entry.reprompts = session.reprompts_used;
    entry.failed_cells = session.failed_cells;
    entry.error = error;
    costs(&mut entry, &session.transcript);
    let examples = if settings.distill {
        examples_for(grid, &session.accepted)
    } else {
        Vec::new()
    };
    Ok(JobOutput {
        entry,
        files: Some(TableOutputs {
            records: session.accepted,
            transcript: session.transcript,
            examples,
        }),
    })
}

fn examples_for(grid: &GridTable, records: &[ExtractedRecord]) -> Vec<DistillationExample> {
    records
        .iter()
        .filter(|r| !r.failed)
        .filter_map(|r| {
            let input = condense_table(grid, r.cell.as_ref()?)?;
            Some(DistillationExample {
                input,
                output: model_line(r),
            })
        })
        .collect()
}

fn per_cell_job(
    source: &SourceTable,
    grid: &GridTable,
    settings: &ExtractSettings,
    client: &dyn ModelClient,
) -> Result<JobOutput> {
    let config = engine_config(settings, &source.id);
    let targets = detect_target_cells(grid, &config.detector);
    if targets.is_empty() {
        return Ok(JobOutput {
            entry: TableEntry::new(TableStatus::Skipped),
            files: Some(TableOutputs {
                records: vec![],
                transcript: vec![],
                examples: vec![],
            }),
        });
    }
    if settings.dump_prompt.is_some() {
        let bundles: Vec<Value> = targets
            .iter()
            .filter_map(|t| build_cell_prompt(source, grid, &settings.schema, t, &config.prompt))
            .map(|b| serde_json::json!({"bundle": b, "text": b.text()}))
            .collect();
        dump(settings, &source.id, &bundles)?;
    }
    let outcome = run_cell_by_cell(source, grid, &settings.schema, client, &config)?;
    let mut entry = TableEntry::new(if outcome.malformed.is_empty() {
        TableStatus::Complete
    } else {
        TableStatus::Partial
    });
    entry.targets = targets.len();
    entry.records = outcome.records.len();
    entry.failed_cells = outcome.malformed.len();
    costs(&mut entry, &outcome.transcript);
    if let Some((cell, reason)) = outcome.malformed.first() {
        entry.error = Some(format!("cell ({}, {}): {reason}", cell.row, cell.col));
    }
    let examples = if settings.distill {
        examples_for(grid, &outcome.records)
    } else {
        Vec::new()
    };
    Ok(JobOutput {
        entry,
        files: Some(TableOutputs {
            records: outcome.records,
            transcript: outcome.transcript,
            examples,
        }),
    })
}

fn page_job(
    source: &SourceTable,
    settings: &ExtractSettings,
    client: &dyn ModelClient,
) -> Result<JobOutput> {
    if settings.schema.mode != SchemaMode::Page {
        anyhow::bail!("page mode needs a page schema");
    }
    let config = engine_config(settings, &source.id);
    let bundle = build_prompt(source, None, &settings.schema, None, &config.prompt);
    dump(
        settings,
        &source.id,
        &serde_json::json!({"bundle": bundle, "text": bundle.text()}),
    )?;
    match run_page_extraction(source, &settings.schema, client, &config) {
        Ok(outcome) => {
            let mut entry = TableEntry::new(TableStatus::Complete);
            entry.targets = 1;
            entry.records = 1;
            costs(&mut entry, &outcome.transcript);
            Ok(JobOutput {
                entry,
                files: Some(TableOutputs {
                    records: vec![outcome.record],
                    transcript: outcome.transcript,
                    examples: vec![],
                }),
            })
        }
        Err(EngineError::MalformedPage {
            reason, transcript, ..
        }) => {
            let mut entry = TableEntry::failed(reason);
            entry.targets = 1;
            costs(&mut entry, &transcript);
            Ok(JobOutput {
                entry,
                files: Some(TableOutputs {
                    records: vec![],
                    transcript,
                    examples: vec![],
                }),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn write_outputs(out: &Path, id: &str, files: &TableOutputs, distill: bool) -> Result<()> {
    let records: Vec<String> = files
        .records
        .iter()
        .map(ExtractedRecord::to_jsonl)
        .collect();
    write_atomic(&table_path(out, id, "records"), &jsonl(records))?;
    write_atomic(
        &table_path(out, id, "transcript"),
        &jsonl_of(&files.transcript)?,
    )?;
    if distill {
        write_atomic(
            &table_path(out, id, "examples"),
            &jsonl_of(&files.examples)?,
        )?;
    }
    Ok(())
}

fn concat(out: &Path, ids: &[String], suffix: &str) -> Result<String> {
    let mut all = String::new();
    for id in ids {
        let path = table_path(out, id, suffix);
        if path.is_file() {
            all.push_str(&std::fs::read_to_string(&path)?);
        }
    }
    Ok(all)
}

#[derive(Debug, Serialize)]
struct RunSummary {
    tables: usize,
    complete: usize,
    partial: usize,
    failed: usize,
    skipped: usize,
    client_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    examples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dropped: Option<usize>,
}

/// Run (or resume) extraction over a dataset into `settings.out`.
pub fn run_extract(settings: &ExtractSettings, model: &Model) -> Result<Outcome> {
    let docs = load_dataset(&settings.dataset)?;
    let jobs: Vec<Job> = docs
        .iter()
        .flat_map(|doc| doc.tables.iter().map(move |table| Job { doc, table }))
        .collect();
    let options = RunOptions {
        mode: if settings.distill {
            format!("{} distill", settings.mode.as_str())
        } else {
            settings.mode.as_str().to_string()
        },
        context_k: settings.engine.prompt.context_k,
        include_context: settings.engine.prompt.include_context,
        include_caption: settings.engine.prompt.include_caption,
        max_reprompts: settings.engine.max_reprompts,
        max_tokens: settings.engine.max_tokens,
    };
    let dataset = settings.dataset.display().to_string();
    let manifest_path = settings.out.join("manifest.json");
    let mut manifest = match RunManifest::load(&manifest_path)? {
        Some(m)
            if m.options == options
                && m.schema == settings.schema_label
                && m.dataset == dataset =>
        {
            m
        }
        Some(_) => {
            log::warn!("existing manifest was made with other settings; starting over");
            RunManifest::new(
                dataset,
                settings.schema_label.clone(),
                model.info.clone(),
                options,
            )
        }
        None => RunManifest::new(
            dataset,
            settings.schema_label.clone(),
            model.info.clone(),
            options,
        ),
    };
    manifest.model = model.info.clone();

    let pending: Vec<&Job> = jobs
        .iter()
        .filter(|job| {
            let done = manifest
                .tables
                .get(&job.table.id)
                .is_some_and(|t| t.status.is_final())
                && table_path(&settings.out, &job.table.id, "records").is_file();
            if done {
                log::info!("{}: already complete, skipping", job.table.id);
            }
            !done
        })
        .collect();
    manifest.save(&manifest_path)?;

    let client = model.client.as_ref();
    let mut write_error = None;
    run_pool(
        &pending,
        settings.workers,
        |job| {
            let output = run_job(job, settings, client);
            let written = match &output.files {
                Some(files) => write_outputs(&settings.out, &job.table.id, files, settings.distill),
                None => Ok(()),
            };
            (output.entry, written)
        },
        |i, (entry, written)| {
            let id = pending[i].table.id.clone();
            log::info!("{id}: {:?}", entry.status);
            if let Err(e) = written {
                write_error.get_or_insert(e);
                return;
            }
            manifest.record(id, entry);
            if let Err(e) = manifest.save(&manifest_path) {
                write_error.get_or_insert(e);
            }
        },
    );
    if let Some(e) = write_error {
        return Err(e);
    }

    let ids: Vec<String> = jobs.iter().map(|j| j.table.id.clone()).collect();
    write_atomic(
        &settings.out.join("records.jsonl"),
        &concat(&settings.out, &ids, "records")?,
    )?;
    write_atomic(
        &settings.out.join("transcript.jsonl"),
        &concat(&settings.out, &ids, "transcript")?,
    )?;
    let (examples, dropped) = if settings.distill {
        let all = concat(&settings.out, &ids, "examples")?;
        write_atomic(&settings.out.join("examples.jsonl"), &all)?;
        let dropped = ids
            .iter()
            .filter_map(|id| manifest.tables.get(id))
            .map(|t| t.failed_cells)
            .sum();
        (Some(all.lines().count()), Some(dropped))
    } else {
        (None, None)
    };

    let count = |s: TableStatus| {
        ids.iter()
            .filter(|id| manifest.tables.get(*id).is_some_and(|t| t.status == s))
            .count()
    };
    let summary = RunSummary {
        tables: ids.len(),
        complete: count(TableStatus::Complete),
        partial: count(TableStatus::Partial),
        failed: count(TableStatus::Failed),
        skipped: count(TableStatus::Skipped),
        client_calls: manifest.totals.client_calls,
        examples,
        dropped,
    };
    print!("{}", pretty(&summary)?);
    Ok(if summary.partial + summary.failed > 0 {
        Outcome::Partial
    } else {
        Outcome::Success
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tablex_core::table::CellRef;

    #[test]
    fn model_line_drops_linkage() {
        let rec = ExtractedRecord {
            table: Some("d/t".into()),
            cell: Some(CellRef::new(0, 1, "3")),
            value: Some("3".into()),
            type_name: "Other".into(),
            attributes: Default::default(),
            raw_line: String::new(),
            failed: false,
        };
        assert_eq!(model_line(&rec), r#"{"value":"3","type":"Other"}"#);
    }

    #[test]
    fn schema_lookup() {
        assert!(load_schema("ml").is_ok());
        assert!(load_schema("/no/such/schema.json").is_err());
    }
}
