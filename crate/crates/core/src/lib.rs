//! Schema-driven extraction of JSON records from tables.
//!
//! The crate turns table sources (LaTeX, XML, pipe-delimited CSV and HTML
//! pages) into schema-conforming records by prompting a text-completion model
//! cell by cell in a fixed traversal order, repairing the model's output when
//! it drifts from that order, and scoring the result against gold annotations.
//!
//! Layout:
//!
//! - [`table`]: parsers for the four source formats, style stripping, numeric
//!   extraction, target-cell detection and the condensed per-cell view.
//! - [`schema`], [`retrieval`], [`prompt`]: record templates, BM25 context
//!   retrieval and prompt assembly.
//! - [`engine`]: model clients and the extraction loops (full table with
//!   error recovery, cell by cell, and whole page).
//! - [`eval`]: attribute matching, Table-F1, Tuple-F1, Page-F1 and threshold
//!   calibration.
//! - [`leaderboard`]: linking extracted result records to a known
//!   leaderboard taxonomy.

pub mod engine;
pub mod eval;
pub mod leaderboard;
pub mod prompt;
pub mod retrieval;
pub mod schema;
pub mod table;

pub use engine::{
    CompletionRequest, EngineConfig, ExtractedRecord, ModelClient, RecoverySession, ReplayClient,
};
pub use schema::{AttributeKind, AttributeSpec, ExtractionSchema, RecordTemplate};
pub use table::{CellRef, GridCell, GridTable, SourceTable, TableFormat};
