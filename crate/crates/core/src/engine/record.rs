//! Extracted records, their JSONL form, and parsing of model output lines.

use crate::schema::{ExtractionSchema, SchemaMode};
use crate::table::{extract_numeric, CellRef};
use indexmap::IndexMap;
use serde_json::{Map, Value};

/// An attribute answer: a text span or a free-form sub-attribute map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrValue {
    Text(String),
    Map(IndexMap<String, String>),
}

impl AttrValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(t) => Some(t),
            AttrValue::Map(_) => None,
        }
    }

    /// JSON value; strings stay strings, objects keep their key order.
    pub fn to_json(&self) -> Value {
        match self {
            AttrValue::Text(t) => Value::String(t.clone()),
            AttrValue::Map(m) => Value::Object(
                m.iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect(),
            ),
        }
    }

    /// Read a JSON value; null becomes `placeholder`, scalars are stringified.
    pub fn from_json(value: &Value, placeholder: &str) -> AttrValue {
        match value {
            Value::Object(m) => AttrValue::Map(
                m.iter()
                    .map(|(k, v)| (k.clone(), scalar_text(v, placeholder)))
                    .collect(),
            ),
            other => AttrValue::Text(scalar_text(other, placeholder)),
        }
    }
}

fn scalar_text(value: &Value, placeholder: &str) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Null => placeholder.to_string(),
        other => other.to_string(),
    }
}

/// One record: a cell (or page) described by a template.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedRecord {
    /// Table or page the record belongs to.
    pub table: Option<String>,
    /// Source cell; absent for page records.
    pub cell: Option<CellRef>,
    /// The `value` field as emitted.
    pub value: Option<String>,
    pub type_name: String,
    pub attributes: IndexMap<String, AttrValue>,
    /// The line the record was parsed from.
    pub raw_line: String,
    /// Set when no acceptable description was obtained for the cell.
    pub failed: bool,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("not valid JSON: {0}")]
    Json(String),
    #[error("not a JSON object")]
    NotObject,
    #[error("missing `{0}`")]
    Missing(&'static str),
    #[error("unknown record type `{0}`")]
    UnknownType(String),
    #[error("`cell` must be an object with row, col and value")]
    BadCell,
}

impl ExtractedRecord {
    /// The empty-attribute record standing in for a cell that could not be
    /// extracted.
    pub fn failed_for(cell: &CellRef, schema: &ExtractionSchema) -> Self {
        Self {
            table: None,
            cell: Some(cell.clone()),
            value: Some(cell.value_text.clone()),
            type_name: schema.fallback_template().type_name.clone(),
            attributes: IndexMap::new(),
            raw_line: String::new(),
            failed: true,
        }
    }

    pub fn attribute_text(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).and_then(AttrValue::as_text)
    }

    /// Flat JSON object: table, cell, value, type, attributes, failed.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        if let Some(t) = &self.table {
            obj.insert("table".into(), Value::String(t.clone()));
        }
        if let Some(c) = &self.cell {
            obj.insert(
                "cell".into(),
                serde_json::json!({"row": c.row, "col": c.col, "value": c.value_text}),
            );
        }
        if let Some(v) = &self.value {
            obj.insert("value".into(), Value::String(v.clone()));
        }
        obj.insert("type".into(), Value::String(self.type_name.clone()));
        for (k, v) in &self.attributes {
            obj.insert(k.clone(), v.to_json());
        }
        if self.failed {
            obj.insert("failed".into(), Value::Bool(true));
        }
        Value::Object(obj)
    }

    /// One JSONL line, without the trailing newline.
    pub fn to_jsonl(&self) -> String {
        self.to_json().to_string()
    }

    /// Read the flat JSONL form (gold or predicted files). Every key other
    /// than the reserved ones is an attribute; no schema check is made.
    pub fn from_json(value: &Value, placeholder: &str) -> Result<Self, RecordError> {
        let obj = value.as_object().ok_or(RecordError::NotObject)?;
        let cell = match obj.get("cell") {
            None | Some(Value::Null) => None,
            Some(c) => Some(parse_cell(c).ok_or(RecordError::BadCell)?),
        };
        let type_name = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or(RecordError::Missing("type"))?
            .to_string();
        let attributes = obj
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "table" | "cell" | "value" | "type" | "failed"))
            .map(|(k, v)| (k.clone(), AttrValue::from_json(v, placeholder)))
            .collect();
        Ok(Self {
            table: obj.get("table").and_then(Value::as_str).map(str::to_string),
            cell,
            value: obj.get("value").map(|v| scalar_text(v, placeholder)),
            type_name,
            attributes,
            raw_line: String::new(),
            failed: obj.get("failed").and_then(Value::as_bool).unwrap_or(false),
        })
    }

    pub fn from_jsonl(line: &str, placeholder: &str) -> Result<Self, RecordError> {
        let value: Value =
            serde_json::from_str(line).map_err(|e| RecordError::Json(e.to_string()))?;
        Self::from_json(&value, placeholder)
    }
}

fn parse_cell(value: &Value) -> Option<CellRef> {
    let row = value.get("row")?.as_u64()? as usize;
    let col = value.get("col")?.as_u64()? as usize;
    let text = value
        .get("value")
        .map_or(String::new(), |v| scalar_text(v, ""));
    Some(CellRef::new(row, col, text))
}

/// A model output line: a record, or why it was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedLine {
    Record(ExtractedRecord),
    Malformed { line: String, reason: RecordError },
}

/// Validate one model-emitted object against the schema.
///
/// Keys the record's template does not define are dropped with a warning.
pub fn record_from_model_object(
    value: &Value,
    schema: &ExtractionSchema,
    raw_line: &str,
) -> Result<ExtractedRecord, RecordError> {
    let obj = value.as_object().ok_or(RecordError::NotObject)?;
    let (record_value, template) = match schema.mode {
        SchemaMode::Cell => {
            let v = obj
                .get("value")
                .filter(|v| !v.is_null())
                .ok_or(RecordError::Missing("value"))?;
            let t = obj
                .get("type")
                .and_then(Value::as_str)
                .ok_or(RecordError::Missing("type"))?;
            let template = schema
                .template(t)
                .ok_or_else(|| RecordError::UnknownType(t.to_string()))?;
            (Some(scalar_text(v, "")), template)
        }
        SchemaMode::Page => (None, &schema.templates[0]),
    };
    let mut attributes = IndexMap::new();
    for (k, v) in obj {
        if matches!(k.as_str(), "value" | "type") && schema.mode == SchemaMode::Cell {
            continue;
        }
        if template.attribute(k).is_some() {
            attributes.insert(k.clone(), AttrValue::from_json(v, &schema.placeholder_text));
        } else {
            log::warn!(
                "dropping key `{k}` not in template `{}`",
                template.type_name
            );
        }
    }
    if schema.mode == SchemaMode::Page {
        for a in &template.attributes {
            attributes
                .entry(a.name.clone())
                .or_insert_with(|| AttrValue::Text(schema.placeholder_text.clone()));
        }
    }
    Ok(ExtractedRecord {
        table: None,
        cell: None,
        value: record_value,
        type_name: template.type_name.clone(),
        attributes,
        raw_line: raw_line.to_string(),
        failed: false,
    })
}

/// Parse a completion, one JSON object per line.
///
/// Blank lines are ignored. A final line without a newline terminator is
/// kept only if it parses; otherwise it is treated as cut off and dropped.
pub fn parse_record_lines(completion: &str, schema: &ExtractionSchema) -> Vec<ParsedLine> {
    let mut lines: Vec<&str> = completion.split('\n').collect();
    let trailing = if completion.ends_with('\n') {
        lines.pop();
        None
    } else {
        lines.pop()
    };
    let parse = |line: &str| {
        let trimmed = line.trim();
        serde_json::from_str::<Value>(trimmed)
            .map_err(|e| RecordError::Json(e.to_string()))
            .and_then(|v| record_from_model_object(&v, schema, trimmed))
    };
    let mut out: Vec<ParsedLine> = lines
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| match parse(l) {
            Ok(r) => ParsedLine::Record(r),
            Err(reason) => ParsedLine::Malformed {
                line: l.to_string(),
                reason,
            },
        })
        .collect();
    if let Some(last) = trailing.filter(|l| !l.trim().is_empty()) {
        if let Ok(r) = parse(last) {
            out.push(ParsedLine::Record(r));
        }
    }
    out
}

/// Whether an emitted `value` names the expected cell: numerically equal
/// when both sides carry a number, else equal up to whitespace.
pub fn values_match(predicted: &str, expected: &str) -> bool {
    match (extract_numeric(predicted), extract_numeric(expected)) {
        (Some(p), Some(e)) => p == e,
        _ => collapse_ws(predicted) == collapse_ws(expected),
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
