//! Extraction schemas: ordered record templates loaded from JSON.
//!
//! ```json
//! {
//!   "placeholder": "xx",
//!   "templates": [
//!     {"type": "Other", "attributes": []},
//!     {"type": "Result", "attributes": [
//!       {"name": "task", "kind": "text_span"},
//!       {"name": "experimental settings", "kind": "mapping"}
//!     ]}
//!   ]
//! }
//! ```
//!
//! Page schemas (`"mode": "page"`) hold a single template describing a whole
//! page rather than one cell.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

/// Placeholder for unanswerable attributes of cell schemas.
pub const CELL_PLACEHOLDER: &str = "xx";
/// Placeholder used by page schemas.
pub const PAGE_PLACEHOLDER: &str = "<NULL>";

/// Keys the record format reserves for itself.
const RESERVED: &[&str] = &["value", "type", "table", "cell", "failed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    /// A text span answer.
    TextSpan,
    /// A free-form object of sub-attributes.
    Mapping,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(default = "default_kind")]
    pub kind: AttributeKind,
}

fn default_kind() -> AttributeKind {
    AttributeKind::TextSpan
}

impl AttributeSpec {
    pub fn text(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::TextSpan,
        }
    }

    pub fn mapping(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Mapping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordTemplate {
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default)]
    pub attributes: Vec<AttributeSpec>,
}

impl RecordTemplate {
    pub fn new(type_name: impl Into<String>, attributes: Vec<AttributeSpec>) -> Self {
        Self {
            type_name: type_name.into(),
            attributes,
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaMode {
    /// One record per target cell.
    #[default]
    Cell,
    /// One record per page.
    Page,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionSchema {
    #[serde(default)]
    pub mode: SchemaMode,
    /// The unanswerable-attribute marker named in the instructions.
    #[serde(rename = "placeholder", default = "default_placeholder")]
    pub placeholder_text: String,
    /// How target cells are referred to in instructions.
    #[serde(default = "default_cell_noun")]
    pub cell_noun: String,
    /// Page schemas only: what the page describes, e.g. "automobile".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub templates: Vec<RecordTemplate>,
}

fn default_placeholder() -> String {
    CELL_PLACEHOLDER.to_string()
}

fn default_cell_noun() -> String {
    "numeric cells".to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read schema {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema has no templates")]
    NoTemplates,
    #[error("duplicate record type `{0}`")]
    DuplicateType(String),
    #[error("template `{template}` repeats attribute `{attribute}`")]
    DuplicateAttribute { template: String, attribute: String },
    #[error("empty {0} name")]
    EmptyName(&'static str),
    #[error("template `{template}` uses reserved attribute name `{attribute}`")]
    ReservedName { template: String, attribute: String },
    #[error("page schemas take exactly one template, found {0}")]
    PageTemplates(usize),
}

impl ExtractionSchema {
    pub fn new(templates: Vec<RecordTemplate>) -> Result<Self, SchemaError> {
        let schema = Self {
            mode: SchemaMode::Cell,
            placeholder_text: default_placeholder(),
            cell_noun: default_cell_noun(),
            subject: None,
            templates,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Read and validate a schema file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.templates.is_empty() {
            return Err(SchemaError::NoTemplates);
        }
        if self.mode == SchemaMode::Page && self.templates.len() != 1 {
            return Err(SchemaError::PageTemplates(self.templates.len()));
        }
        let mut types = HashSet::new();
        for t in &self.templates {
            if t.type_name.trim().is_empty() {
                return Err(SchemaError::EmptyName("record type"));
            }
            if !types.insert(t.type_name.as_str()) {
                return Err(SchemaError::DuplicateType(t.type_name.clone()));
            }
            let mut names = HashSet::new();
            for a in &t.attributes {
                if a.name.trim().is_empty() {
                    return Err(SchemaError::EmptyName("attribute"));
                }
                if RESERVED.contains(&a.name.as_str()) {
                    return Err(SchemaError::ReservedName {
                        template: t.type_name.clone(),
                        attribute: a.name.clone(),
                    });
                }
                if !names.insert(a.name.as_str()) {
                    return Err(SchemaError::DuplicateAttribute {
                        template: t.type_name.clone(),
                        attribute: a.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn template(&self, type_name: &str) -> Option<&RecordTemplate> {
        self.templates.iter().find(|t| t.type_name == type_name)
    }

    /// The catch-all template (no attributes of its own), else the first.
    pub fn fallback_template(&self) -> &RecordTemplate {
        self.templates
            .iter()
            .find(|t| t.attributes.is_empty())
            .unwrap_or(&self.templates[0])
    }

    pub fn has_mapping_attributes(&self) -> bool {
        self.templates
            .iter()
            .flat_map(|t| &t.attributes)
            .any(|a| a.kind == AttributeKind::Mapping)
    }
}

/// Schemas shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("ml", include_str!("../schemas/ml.json")),
    (
        "ml_leaderboard",
        include_str!("../schemas/ml_leaderboard.json"),
    ),
    ("chemistry", include_str!("../schemas/chemistry.json")),
    ("discomat", include_str!("../schemas/discomat.json")),
    ("swde_auto", include_str!("../schemas/swde_auto.json")),
    ("swde_book", include_str!("../schemas/swde_book.json")),
    ("swde_camera", include_str!("../schemas/swde_camera.json")),
    ("swde_job", include_str!("../schemas/swde_job.json")),
    ("swde_movie", include_str!("../schemas/swde_movie.json")),
    (
        "swde_nbaplayer",
        include_str!("../schemas/swde_nbaplayer.json"),
    ),
    (
        "swde_restaurant",
        include_str!("../schemas/swde_restaurant.json"),
    ),
    (
        "swde_university",
        include_str!("../schemas/swde_university.json"),
    ),
];

/// A bundled schema by name.
pub fn bundled(name: &str) -> Option<ExtractionSchema> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ExtractionSchema::from_json(text).expect("bundled schemas are valid"))
}
