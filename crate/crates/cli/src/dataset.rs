//! Dataset layout: one directory per document holding `table_*` sources,
//! an optional `context.txt` and an optional `gold.jsonl`.

use anyhow::{bail, Context, Result};
use std::path::{Path, PathBuf};
use tablex_core::engine::ExtractedRecord;
use tablex_core::table::{latex_caption, SourceTable, TableFormat};

#[derive(Debug, Clone)]
pub struct TableFile {
    /// `<document>/<file stem>`.
    pub id: String,
    pub path: PathBuf,
    pub format: TableFormat,
}

#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub dir: PathBuf,
    pub tables: Vec<TableFile>,
    pub context: Vec<String>,
    pub gold: Option<PathBuf>,
}

/// Sort key that orders `table_2` before `table_10`.
fn natural_key(name: &str) -> Vec<(String, u64)> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut digits = String::new();
    for c in name.chars() {
        if c.is_ascii_digit() {
            digits.push(c);
        } else {
            if !digits.is_empty() {
                out.push((
                    std::mem::take(&mut text),
                    digits.parse().unwrap_or(u64::MAX),
                ));
                digits.clear();
            }
            text.push(c);
        }
    }
    out.push((text, digits.parse().unwrap_or(0)));
    out
}

/// Blank-line separated paragraphs.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    text.replace("\r\n", "\n")
        .split("\n\n")
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|p| !p.is_empty())
        .collect()
}

fn table_files(doc_id: &str, dir: &Path) -> Result<Vec<TableFile>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        if !stem.starts_with("table_") {
            continue;
        }
        if let Some(format) = TableFormat::from_extension(ext) {
            files.push(TableFile {
                id: format!("{doc_id}/{stem}"),
                path: path.clone(),
                format,
            });
        }
    }
    files.sort_by_key(|f| natural_key(&f.id));
    Ok(files)
}

fn load_document(id: String, dir: PathBuf) -> Result<Document> {
    let tables = table_files(&id, &dir)?;
    let context_path = dir.join("context.txt");
    let context = if context_path.is_file() {
        split_paragraphs(&std::fs::read_to_string(&context_path)?)
    } else {
        Vec::new()
    };
    let gold = Some(dir.join("gold.jsonl")).filter(|p| p.is_file());
    Ok(Document {
        id,
        dir,
        tables,
        context,
        gold,
    })
}

fn dir_name(dir: &Path) -> String {
    dir.file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("doc")
        .to_string()
}

/// Documents under `root`, by id. A root holding table files directly is
/// itself a single document.
pub fn load_dataset(root: &Path) -> Result<Vec<Document>> {
    if !root.is_dir() {
        bail!("dataset {} is not a directory", root.display());
    }
    let own = table_files(&dir_name(root), root)?;
    if !own.is_empty() {
        return Ok(vec![load_document(dir_name(root), root.to_path_buf())?]);
    }
    let mut docs = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let path = entry?.path();
        if path.is_dir() {
            docs.push(load_document(dir_name(&path), path)?);
        }
    }
    docs.sort_by_key(|d| natural_key(&d.id));
    Ok(docs)
}

impl TableFile {
    /// Read the source, attaching the document context and, for LaTeX, the
    /// caption found in the source.
    pub fn load(&self, context: &[String]) -> Result<SourceTable> {
        let raw = std::fs::read_to_string(&self.path)
            .with_context(|| format!("reading {}", self.path.display()))?;
        let mut table = SourceTable::new(&self.id, self.format, raw)
            .with_context(|| format!("loading {}", self.path.display()))?
            .with_context(context.to_vec());
        if self.format == TableFormat::Latex {
            if let Some(c) = latex_caption(&table.raw) {
                table = table.with_caption(c);
            }
        }
        Ok(table)
    }
}

/// Read records from a JSONL file. Table ids without a `/` are taken to be
/// relative to `doc_id`.
pub fn read_records(path: &Path, doc_id: Option<&str>) -> Result<Vec<ExtractedRecord>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut record = ExtractedRecord::from_jsonl(line, "xx")
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if let Some(doc) = doc_id {
            match &record.table {
                Some(t) if !t.contains('/') => record.table = Some(format!("{doc}/{t}")),
                None => bail!("{}:{}: record has no table id", path.display(), i + 1),
                _ => {}
            }
        }
        out.push(record);
    }
    Ok(out)
}

/// Gold records from a file, or from every document's `gold.jsonl` under a
/// dataset directory.
pub fn read_gold(path: &Path) -> Result<Vec<ExtractedRecord>> {
    if path.is_file() {
        return read_records(path, None);
    }
    let mut out = Vec::new();
    for doc in load_dataset(path)? {
        if let Some(gold) = &doc.gold {
            out.extend(read_records(gold, Some(&doc.id))?);
        }
    }
    Ok(out)
}
