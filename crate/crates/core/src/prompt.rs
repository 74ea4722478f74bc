//! Prompt assembly: retrieved context, table source, rendered templates,
//! instructions and the opening of the first record.

use crate::retrieval::{bm25_rank, table_query};
use crate::schema::{AttributeKind, ExtractionSchema, RecordTemplate, SchemaMode};
use crate::table::{
    condense_table, page_title, remove_latex_caption, CellRef, GridTable, SourceTable, TableFormat,
};
use serde::Serialize;

/// Knobs for prompt construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptOptions {
    /// Retrieve supplementary paragraphs at all.
    pub include_context: bool,
    /// How many paragraphs to retrieve.
    pub context_k: usize,
    /// Keep the table caption in the table block (and in the retrieval query).
    pub include_caption: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            include_context: true,
            context_k: 2,
            include_caption: false,
        }
    }
}

/// The prompt's parts, in the order they are concatenated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub context_block: String,
    pub table_block: String,
    pub schema_block: String,
    pub instruction_block: String,
    pub initial_stub: String,
}

impl PromptBundle {
    /// Everything before the stub: non-empty blocks separated by blank lines.
    pub fn prefix(&self) -> String {
        [
            &self.context_block,
            &self.table_block,
            &self.schema_block,
            &self.instruction_block,
        ]
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| b.as_str())
        .collect::<Vec<_>>()
        .join("\n\n")
    }

    /// The complete prompt text.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.prefix(), self.initial_stub)
    }
}

/// Opening of a cell record, left for the model to complete:
/// `{"value": "<cell>", "type":`.
pub fn cell_stub(value_text: &str) -> String {
    format!("{{\"value\": {}, \"type\":", json_str(value_text))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

fn number_word(n: usize) -> String {
    const WORDS: [&str; 13] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
        "eleven", "twelve",
    ];
    WORDS
        .get(n)
        .map_or_else(|| n.to_string(), |w| w.to_string())
}

fn quoted_list(names: &[&str]) -> String {
    let quoted: Vec<String> = names.iter().map(|n| format!("\"{n}\"")).collect();
    match quoted.len() {
        0 => String::new(),
        1 => quoted[0].clone(),
        2 => format!("{} and {}", quoted[0], quoted[1]),
        n => format!("{}, and {}", quoted[..n - 1].join(", "), quoted[n - 1]),
    }
}

/// One template as a single-line JSON object with placeholder values.
pub fn render_template(template: &RecordTemplate, mode: SchemaMode) -> String {
    let mut fields = Vec::new();
    if mode == SchemaMode::Cell {
        fields.push("\"value\": \"xx\"".to_string());
        fields.push(format!("\"type\": {}", json_str(&template.type_name)));
    }
    for attr in &template.attributes {
        let placeholder = match attr.kind {
            AttributeKind::TextSpan => "\"xx\"",
            AttributeKind::Mapping => "{\"xx\": \"yy\"}",
        };
        fields.push(format!("{}: {placeholder}", json_str(&attr.name)));
    }
    format!("{{{}}}", fields.join(", "))
}

/// Header line plus one template line per record type.
pub fn render_schema_block(schema: &ExtractionSchema) -> String {
    let header = match schema.mode {
        SchemaMode::Cell => {
            let names: Vec<&str> = schema
                .templates
                .iter()
                .map(|t| t.type_name.as_str())
                .collect();
            if names.len() == 1 {
                format!(
                    "Here is the JSON template for {}: {}:",
                    schema.cell_noun,
                    quoted_list(&names)
                )
            } else {
                format!(
                    "Here are JSON templates for {} types of {}: {}:",
                    number_word(names.len()),
                    schema.cell_noun,
                    quoted_list(&names)
                )
            }
        }
        SchemaMode::Page => format!(
            "Here is the JSON template for {} attribute extraction:",
            schema.subject.as_deref().unwrap_or("page")
        ),
    };
    let mut lines = vec![header];
    lines.extend(
        schema
            .templates
            .iter()
            .map(|t| render_template(t, schema.mode)),
    );
    lines.join("\n")
}

fn table_noun(format: TableFormat) -> &'static str {
    match format {
        TableFormat::Latex => "latex table",
        TableFormat::Xml => "XML table",
        TableFormat::PipeCsv => "table",
        TableFormat::Html => "HTML table",
    }
}

fn placeholder_clause(schema: &ExtractionSchema, scope: &str) -> String {
    let mut clause = format!(
        "For any unanswerable attributes in the {scope}, set their value to the placeholder \"{}\"",
        schema.placeholder_text
    );
    if schema.has_mapping_attributes() {
        clause
            .push_str(" if it is of string type and {\"xx\": \"yy\"} if it is of dictionary type");
    }
    clause.push('.');
    clause
}

fn table_block(table: &SourceTable, options: &PromptOptions) -> String {
    let mut raw = table.raw.trim_end().to_string();
    if table.format == TableFormat::Latex && !options.include_caption {
        raw = remove_latex_caption(&raw);
    }
    if options.include_caption {
        if let Some(caption) = table.caption.as_deref().filter(|c| !raw.contains(*c)) {
            raw = format!("{raw}\nCaption: {caption}");
        }
    }
    raw
}

fn context_block(table: &SourceTable, grid: Option<&GridTable>, options: &PromptOptions) -> String {
    if !options.include_context || table.context_paragraphs.is_empty() || options.context_k == 0 {
        return String::new();
    }
    let query = table_query(table, grid, options.include_caption);
    bm25_rank(&query, &table.context_paragraphs, options.context_k).join("\n\n")
}

/// Assemble the full-table prompt.
///
/// Cell schemas need `first_cell`, the first detected target; page schemas
/// ignore it and open the record with the page title.
pub fn build_prompt(
    table: &SourceTable,
    grid: Option<&GridTable>,
    schema: &ExtractionSchema,
    first_cell: Option<&CellRef>,
    options: &PromptOptions,
) -> PromptBundle {
    match schema.mode {
        SchemaMode::Cell => {
            let instruction_block = format!(
                "Please describe all {} in the above {} following the JSON templates (proceeding by row in a left-right, top-down direction). For each cell, output one JSON description per line. {}\n\nCell Description:",
                schema.cell_noun,
                table_noun(table.format),
                placeholder_clause(schema, "templates"),
            );
            PromptBundle {
                context_block: context_block(table, grid, options),
                table_block: table_block(table, options),
                schema_block: render_schema_block(schema),
                instruction_block,
                initial_stub: cell_stub(first_cell.map_or("", |c| c.value_text.as_str())),
            }
        }
        SchemaMode::Page => build_page_prompt(table, schema),
    }
}

fn build_page_prompt(page: &SourceTable, schema: &ExtractionSchema) -> PromptBundle {
    let subject = schema.subject.as_deref().unwrap_or("page");
    let instruction_block = format!(
        "Please extract the {subject}'s attributes from the HTML code above following the JSON template. {}",
        placeholder_clause(schema, "template"),
    );
    PromptBundle {
        context_block: String::new(),
        table_block: page.raw.trim_end().to_string(),
        schema_block: render_schema_block(schema),
        instruction_block,
        initial_stub: page_stub(page, &schema.templates[0], &schema.placeholder_text),
    }
}

/// `{"webpage title": "<title>", "<next attribute>":` when the template
/// starts with a page-title attribute, else `{"<first attribute>":`.
pub fn page_stub(page: &SourceTable, template: &RecordTemplate, placeholder: &str) -> String {
    let attrs = &template.attributes;
    match attrs.first() {
        Some(first) if first.name == "webpage title" => {
            let title = page_title(&page.raw).unwrap_or_else(|| placeholder.to_string());
            match attrs.get(1) {
                Some(next) => format!(
                    "{{{}: {}, {}:",
                    json_str(&first.name),
                    json_str(&title),
                    json_str(&next.name)
                ),
                None => format!("{{{}: {}", json_str(&first.name), json_str(&title)),
            }
        }
        Some(first) => format!("{{{}:", json_str(&first.name)),
        None => "{".to_string(),
    }
}

/// Single-cell prompt over the condensed table, for short-context models.
///
/// Returns `None` when `cell` is not part of `grid`.
pub fn build_cell_prompt(
    table: &SourceTable,
    grid: &GridTable,
    schema: &ExtractionSchema,
    cell: &CellRef,
    options: &PromptOptions,
) -> Option<PromptBundle> {
    let condensed = condense_table(grid, cell)?;
    let instruction_block = format!(
        "Please describe the selected cell in the above {} following the JSON templates. Output one JSON description on a single line. {}\n\nCell Description:",
        table_noun(table.format),
        placeholder_clause(schema, "templates"),
    );
    Some(PromptBundle {
        context_block: context_block(table, Some(grid), options),
        table_block: condensed,
        schema_block: render_schema_block(schema),
        instruction_block,
        initial_stub: cell_stub(&cell.value_text),
    })
}
