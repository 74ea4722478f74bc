//! Table sources and the uniform cell grid they parse into.

mod csv;
mod detect;
mod html;
mod latex;
mod numeric;
mod style;
mod xml;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub use csv::parse_pipe_csv_table;
pub use detect::{condense_table, detect_target_cells, DetectorPolicy, SELECT_MARKER};
pub use html::{page_title, parse_html_page, TextNode};
pub use latex::{latex_caption, parse_latex_table, remove_latex_caption};
pub use numeric::extract_numeric;
pub use style::{strip_style, Stripped};
pub use xml::parse_xml_table;

/// Source markup of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Latex,
    Xml,
    PipeCsv,
    Html,
}

impl TableFormat {
    /// Guess the format from a file extension.
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "tex" | "latex" => Some(Self::Latex),
            "xml" => Some(Self::Xml),
            "csv" | "psv" => Some(Self::PipeCsv),
            "html" | "htm" => Some(Self::Html),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Latex => "latex",
            Self::Xml => "xml",
            Self::PipeCsv => "pipe_csv",
            Self::Html => "html",
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "latex" | "tex" => Ok(Self::Latex),
            "xml" => Ok(Self::Xml),
            "pipe_csv" | "csv" => Ok(Self::PipeCsv),
            "html" => Ok(Self::Html),
            other => Err(format!("unknown table format `{other}`")),
        }
    }
}

/// One table's raw source plus whatever document context came with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTable {
    pub id: String,
    pub format: TableFormat,
    pub raw: String,
    #[serde(default)]
    pub caption: Option<String>,
    #[serde(default)]
    pub context_paragraphs: Vec<String>,
}

impl SourceTable {
    /// Build a table with no caption or context. Fails on empty source text.
    pub fn new(
        id: impl Into<String>,
        format: TableFormat,
        raw: impl Into<String>,
    ) -> Result<Self, ParseError> {
        let raw = raw.into();
        if raw.trim().is_empty() {
            return Err(ParseError::Empty);
        }
        Ok(Self {
            id: id.into(),
            format,
            raw,
            caption: None,
            context_paragraphs: Vec::new(),
        })
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = Some(caption.into());
        self
    }

    pub fn with_context(mut self, paragraphs: Vec<String>) -> Self {
        self.context_paragraphs = paragraphs;
        self
    }

    /// Parse the source with the parser its format calls for.
    ///
    /// HTML pages have no grid; they are handled by [`parse_html_page`].
    pub fn parse(&self) -> Result<GridTable, ParseError> {
        let mut grid = match self.format {
            TableFormat::Latex => parse_latex_table(&self.raw)?,
            TableFormat::Xml => parse_xml_table(&self.raw)?,
            TableFormat::PipeCsv => parse_pipe_csv_table(&self.raw)?,
            TableFormat::Html => return Err(ParseError::NotAGrid),
        };
        grid.source_id = self.id.clone();
        Ok(grid)
    }
}

/// A single grid position after parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub raw_text: String,
    pub plain_text: String,
    pub row: usize,
    pub col: usize,
    pub row_span: usize,
    pub col_span: usize,
    pub numeric_value: Option<f64>,
    pub is_bold: bool,
    /// Set on positions covered by a multi-row cell above; such cells carry no
    /// content of their own and are never detection targets.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub placeholder: bool,
}

impl GridCell {
    /// Build a cell from its source fragment, stripping style and reading the
    /// first numeric value.
    pub fn from_fragment(raw: &str, content: &str, row: usize, col: usize) -> Self {
        let stripped = strip_style(content);
        let numeric_value = extract_numeric(&stripped.plain_text);
        Self {
            raw_text: raw.to_string(),
            plain_text: stripped.plain_text,
            row,
            col,
            row_span: 1,
            col_span: 1,
            numeric_value,
            is_bold: stripped.is_bold,
            placeholder: false,
        }
    }

    pub(crate) fn empty(row: usize, col: usize) -> Self {
        Self {
            raw_text: String::new(),
            plain_text: String::new(),
            row,
            col,
            row_span: 1,
            col_span: 1,
            numeric_value: None,
            is_bold: false,
            placeholder: false,
        }
    }

    pub(crate) fn covered(row: usize, col: usize, col_span: usize) -> Self {
        Self {
            col_span,
            placeholder: true,
            ..Self::empty(row, col)
        }
    }
}

/// Rectangular cell grid, cells stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub cells: Vec<GridCell>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub source_id: String,
    pub format: TableFormat,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GridTable {
    /// Assemble a grid from cells in any order; sorts them row-major and
    /// derives the dimensions.
    pub(crate) fn from_cells(
        mut cells: Vec<GridCell>,
        format: TableFormat,
        warnings: Vec<String>,
    ) -> Self {
        cells.sort_by_key(|c| (c.row, c.col));
        let n_rows = cells.iter().map(|c| c.row + 1).max().unwrap_or(0);
        let n_cols = cells.iter().map(|c| c.col + c.col_span).max().unwrap_or(0);
        Self {
            cells,
            n_rows,
            n_cols,
            source_id: String::new(),
            format,
            warnings,
        }
    }

    /// Cell whose origin is exactly `(row, col)`.
    pub fn cell(&self, row: usize, col: usize) -> Option<&GridCell> {
        self.cells
            .binary_search_by_key(&(row, col), |c| (c.row, c.col))
            .ok()
            .map(|i| &self.cells[i])
    }

    /// Cells of one row, left to right.
    pub fn row(&self, row: usize) -> impl Iterator<Item = &GridCell> {
        self.cells.iter().filter(move |c| c.row == row)
    }

    /// True when any content-bearing cell is bolded.
    pub fn has_bold_cells(&self) -> bool {
        self.cells.iter().any(|c| c.is_bold && !c.placeholder)
    }

    /// Debug dump: one JSON object per cell.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "row": c.row,
                    "col": c.col,
                    "row_span": c.row_span,
                    "col_span": c.col_span,
                    "plain_text": c.plain_text,
                    "numeric_value": c.numeric_value,
                    "is_bold": c.is_bold,
                })
            })
            .collect();
        serde_json::json!({
            "source_id": self.source_id,
            "format": self.format,
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "cells": cells,
            "warnings": self.warnings,
        })
    }
}

/// Anchor linking a record to the cell it describes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub row: usize,
    pub col: usize,
    #[serde(rename = "value")]
    pub value_text: String,
}

impl CellRef {
    pub fn new(row: usize, col: usize, value_text: impl Into<String>) -> Self {
        Self {
            row,
            col,
            value_text: value_text.into(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty table source")]
    Empty,
    #[error("line {line}: {message}")]
    Latex { line: usize, message: String },
    #[error("malformed XML at {position}: {message}")]
    Xml { position: String, message: String },
    #[error("no table rows found in markup")]
    NoRows,
    #[error("HTML pages are parsed into text nodes, not grids")]
    NotAGrid,
}
