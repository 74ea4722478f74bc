//! Run manifest: options, model and per-table status, kept for resuming.

use crate::io::{pretty, write_atomic};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableStatus {
    Complete,
    Partial,
    Failed,
    Skipped,
}

impl TableStatus {
    /// Whether a resumed run may reuse this table's outputs.
    pub fn is_final(self) -> bool {
        matches!(self, TableStatus::Complete | TableStatus::Skipped)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub status: TableStatus,
    pub targets: usize,
    pub records: usize,
    pub calls: usize,
    pub reprompts: usize,
    pub failed_cells: usize,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TableEntry {
    pub fn new(status: TableStatus) -> Self {
        Self {
            status,
            targets: 0,
            records: 0,
            calls: 0,
            reprompts: 0,
            failed_cells: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
            error: None,
        }
    }

    pub fn failed(error: impl Into<String>) -> Self {
        Self {
            error: Some(error.into()),
            ..Self::new(TableStatus::Failed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    /// `http` or `replay`.
    pub kind: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub mode: String,
    pub context_k: usize,
    pub include_context: bool,
    pub include_caption: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_reprompts: Option<usize>,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub client_calls: usize,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: String,
    pub schema: String,
    pub model: ModelInfo,
    pub options: RunOptions,
    pub tables: BTreeMap<String, TableEntry>,
    pub totals: Counters,
}

impl RunManifest {
    pub fn new(dataset: String, schema: String, model: ModelInfo, options: RunOptions) -> Self {
        Self {
            dataset,
            schema,
            model,
            options,
            tables: BTreeMap::new(),
            totals: Counters::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Option<Self>> {
        if !path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        let manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        Ok(Some(manifest))
    }

    pub fn record(&mut self, id: String, entry: TableEntry) {
        self.tables.insert(id, entry);
        self.totals = Counters {
            client_calls: self.tables.values().map(|t| t.calls).sum(),
            prompt_tokens: self.tables.values().map(|t| t.prompt_tokens).sum(),
            completion_tokens: self.tables.values().map(|t| t.completion_tokens).sum(),
        };
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &pretty(self)?)
    }

    /// Any table not complete or skipped.
    pub fn has_problems(&self) -> bool {
        self.tables.values().any(|t| !t.status.is_final())
    }
}
