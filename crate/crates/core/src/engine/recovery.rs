//! Full-table extraction with iterative error recovery.

use super::client::{ClientError, CompletionRequest, ModelClient, TranscriptEntry};
use super::record::{parse_record_lines, values_match, ExtractedRecord, ParsedLine};
use super::EngineConfig;
use crate::prompt::cell_stub;
use crate::schema::ExtractionSchema;
use crate::table::CellRef;

/// State of one table's extraction; resumable after a client failure.
#[derive(Debug, Clone)]
pub struct RecoverySession {
    pub table_id: String,
    pub targets: Vec<CellRef>,
    /// Index of the next target to describe.
    pub cursor: usize,
    /// One record per target before `cursor`, in target order.
    pub accepted: Vec<ExtractedRecord>,
    pub transcript: Vec<TranscriptEntry>,
    pub reprompts_used: usize,
    pub max_reprompts: usize,
    /// Successful client calls.
    pub calls: usize,
    /// Consecutive calls that accepted nothing at the current cursor.
    pub no_progress: usize,
    /// Targets given up on after repeated failures.
    pub failed_cells: usize,
    /// Lines discarded at or after a deviation.
    pub discarded_lines: usize,
    /// The reprompt budget ran out before every target was described.
    pub incomplete: bool,
    prefix: String,
    /// Accepted model lines, replayed verbatim in later prompts.
    accepted_lines: Vec<String>,
}

/// A client failure part-way through; `session` can be resumed.
#[derive(Debug, thiserror::Error)]
#[error("extraction of {} interrupted: {error}", session.table_id)]
pub struct Interrupted {
    pub session: RecoverySession,
    #[source]
    pub error: ClientError,
}

impl RecoverySession {
    /// `prefix` is the prompt up to (not including) the first record stub.
    pub fn new(
        table_id: impl Into<String>,
        prefix: impl Into<String>,
        targets: Vec<CellRef>,
        max_reprompts: Option<usize>,
    ) -> Self {
        let max_reprompts = max_reprompts.unwrap_or(targets.len());
        Self {
            table_id: table_id.into(),
            targets,
            cursor: 0,
            accepted: Vec::new(),
            transcript: Vec::new(),
            reprompts_used: 0,
            max_reprompts,
            calls: 0,
            no_progress: 0,
            failed_cells: 0,
            discarded_lines: 0,
            incomplete: false,
            prefix: prefix.into(),
            accepted_lines: Vec::new(),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.cursor >= self.targets.len() || self.incomplete
    }

    pub fn records(&self) -> &[ExtractedRecord] {
        &self.accepted
    }

    /// Prompt for the current cursor: prefix, accepted lines, next stub.
    pub fn next_prompt(&self) -> Option<String> {
        let target = self.targets.get(self.cursor)?;
        let mut prompt = self.prefix.clone();
        prompt.push('\n');
        for line in &self.accepted_lines {
            prompt.push_str(line);
            prompt.push('\n');
        }
        prompt.push_str(&cell_stub(&target.value_text));
        Some(prompt)
    }

    /// Drive the loop until every target is described, the reprompt budget
    /// is spent, or the client fails.
    pub fn run(
        &mut self,
        schema: &ExtractionSchema,
        client: &dyn ModelClient,
        config: &EngineConfig,
    ) -> Result<(), ClientError> {
        while !self.is_finished() {
            let is_reprompt = self.calls > 0;
            if is_reprompt && self.reprompts_used >= self.max_reprompts {
                self.incomplete = true;
                break;
            }
            let prompt = self.next_prompt().expect("cursor within targets");
            let request = CompletionRequest {
                prompt,
                stop: config.stop.clone(),
                max_tokens: config.max_tokens,
            };
            let entry = client.call(&request)?;
            self.calls += 1;
            if is_reprompt {
                self.reprompts_used += 1;
            }
            self.absorb(&entry.completion, schema, config.no_progress_limit);
            self.transcript.push(entry);
        }
        Ok(())
    }

    /// Accept records in order from one completion, stopping at the first
    /// line that does not describe the cell under the cursor.
    pub fn absorb(
        &mut self,
        completion: &str,
        schema: &ExtractionSchema,
        no_progress_limit: usize,
    ) {
        let Some(target) = self.targets.get(self.cursor) else {
            return;
        };
        let generated = format!("{}{}", cell_stub(&target.value_text), completion);
        let parsed = parse_record_lines(&generated, schema);
        let total = parsed.len();
        let mut progressed = 0;
        for item in parsed {
            let Some(target) = self.targets.get(self.cursor) else {
                break;
            };
            let ParsedLine::Record(mut record) = item else {
                break;
            };
            if !record
                .value
                .as_deref()
                .is_some_and(|v| values_match(v, &target.value_text))
            {
                break;
            }
            record.table = Some(self.table_id.clone());
            record.cell = Some(target.clone());
            self.accepted_lines.push(record.raw_line.clone());
            self.accepted.push(record);
            self.cursor += 1;
            progressed += 1;
        }
        if total > progressed {
            self.discarded_lines += total - progressed;
            if self.cursor >= self.targets.len() {
                log::warn!(
                    "{}: dropping {} record(s) past the last target",
                    self.table_id,
                    total - progressed
                );
            }
        }
        if progressed > 0 {
            self.no_progress = 0;
            return;
        }
        self.no_progress += 1;
        if self.no_progress >= no_progress_limit.max(1) {
            let target = &self.targets[self.cursor];
            log::warn!(
                "{}: giving up on cell ({}, {}) after {} attempts",
                self.table_id,
                target.row,
                target.col,
                self.no_progress
            );
            let mut record = ExtractedRecord::failed_for(target, schema);
            record.table = Some(self.table_id.clone());
            self.accepted.push(record);
            self.cursor += 1;
            self.failed_cells += 1;
            self.no_progress = 0;
        }
    }
}

/// Run a fresh session over `targets` with the given prompt prefix.
pub fn run_session(
    table_id: &str,
    prefix: String,
    targets: Vec<CellRef>,
    schema: &ExtractionSchema,
    client: &dyn ModelClient,
    config: &EngineConfig,
) -> Result<RecoverySession, Interrupted> {
    let mut session = RecoverySession::new(table_id, prefix, targets, config.max_reprompts);
    match session.run(schema, client, config) {
        Ok(()) => Ok(session),
        Err(error) => Err(Interrupted { session, error }),
    }
}
