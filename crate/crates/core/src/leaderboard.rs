//! Linking extracted result records to a leaderboard taxonomy.

use crate::engine::{
    run_table_extraction, EngineConfig, EngineError, ExtractedRecord, ModelClient,
};
use crate::eval::{is_placeholder, normalize_text, token_f1, Prf};
use crate::schema::ExtractionSchema;
use crate::table::{extract_numeric, CellRef, GridTable, SourceTable};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

pub const RESULT_TYPE: &str = "Result";
pub const EVAL_CLASS: &str = "eval class";
const TASK: &str = "task";
const DATASET: &str = "test data/set";
const METRIC: &str = "metric";

/// Metric words implying that smaller is better.
const LOWER_BETTER_WORDS: &[&str] = &[
    "error",
    "errors",
    "loss",
    "perplexity",
    "ppl",
    "wer",
    "cer",
    "mae",
    "mse",
    "rmse",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Keyword guess for metrics whose direction is not given.
    pub fn guess(metric: &str) -> Direction {
        let tokens = normalize_text(metric);
        if tokens
            .iter()
            .any(|t| LOWER_BETTER_WORDS.contains(&t.as_str()))
        {
            Direction::LowerBetter
        } else {
            Direction::HigherBetter
        }
    }

    pub fn flipped(self) -> Direction {
        match self {
            Direction::HigherBetter => Direction::LowerBetter,
            Direction::LowerBetter => Direction::HigherBetter,
        }
    }

    /// Whether `candidate` beats `incumbent`.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Direction::HigherBetter => candidate > incumbent,
            Direction::LowerBetter => candidate < incumbent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub task: String,
    pub dataset: String,
    pub metric: String,
    pub direction: Direction,
}

#[derive(Deserialize)]
struct RawEntry {
    task: String,
    dataset: String,
    metric: String,
    #[serde(default)]
    direction: Option<Direction>,
}

#[derive(Debug, thiserror::Error)]
pub enum LeaderboardError {
    #[error("cannot read taxonomy {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid taxonomy JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("taxonomy is empty")]
    EmptyTaxonomy,
    #[error("taxonomy repeats ({0}, {1}, {2})")]
    Duplicate(String, String, String),
}

/// Known leaderboards in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    pub entries: Vec<LeaderboardEntry>,
}

impl Taxonomy {
    pub fn new(entries: Vec<LeaderboardEntry>) -> Result<Self, LeaderboardError> {
        if entries.is_empty() {
            return Err(LeaderboardError::EmptyTaxonomy);
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert((&e.task, &e.dataset, &e.metric)) {
                return Err(LeaderboardError::Duplicate(
                    e.task.clone(),
                    e.dataset.clone(),
                    e.metric.clone(),
                ));
            }
        }
        Ok(Self { entries })
    }

    /// Parse a JSON list of {task, dataset, metric, direction?}; missing
    /// directions are guessed from the metric name.
    pub fn from_json(text: &str) -> Result<Self, LeaderboardError> {
        let raw: Vec<RawEntry> = serde_json::from_str(text)?;
        let entries = raw
            .into_iter()
            .map(|r| {
                let direction = r.direction.unwrap_or_else(|| {
                    let d = Direction::guess(&r.metric);
                    log::warn!("no direction for metric `{}`; assuming {d:?}", r.metric);
                    d
                });
                LeaderboardEntry {
                    task: r.task,
                    dataset: r.dataset,
                    metric: r.metric,
                    direction,
                }
            })
            .collect();
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, LeaderboardError> {
        let text = std::fs::read_to_string(path).map_err(|e| LeaderboardError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkedResult {
    pub entry: LeaderboardEntry,
    /// Position of `entry` in the taxonomy.
    pub entry_index: usize,
    pub score: f64,
    pub paper: String,
    pub table: String,
    pub cell: CellRef,
    /// Mean token F1 of task, dataset and metric against the entry.
    pub match_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// Records whose best match scores below this stay unlinked.
    pub min_match: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { min_match: 0.0 }
    }
}

fn eval_class_accepted(record: &ExtractedRecord) -> bool {
    match record.attribute_text(EVAL_CLASS) {
        None => !record.attributes.contains_key(EVAL_CLASS),
        Some(v) => {
            let v = v.trim();
            is_placeholder(v) || v.eq_ignore_ascii_case("all") || v.eq_ignore_ascii_case("null")
        }
    }
}

/// Keep Result records with an "all"/unset eval class on bold cells.
///
/// Tables without any bold cell waive the bold requirement, or, when
/// `candidates` is given, require the cell to be one of those positions.
pub fn filter_result_records(
    records: &[ExtractedRecord],
    grid: &GridTable,
    candidates: Option<&[(usize, usize)]>,
) -> Vec<ExtractedRecord> {
    let has_bold = grid.has_bold_cells();
    records
        .iter()
        .filter(|r| !r.failed && r.type_name == RESULT_TYPE && eval_class_accepted(r))
        .filter(|r| {
            let Some(cell) = &r.cell else { return false };
            if has_bold {
                grid.cell(cell.row, cell.col).is_some_and(|c| c.is_bold)
            } else {
                candidates.is_none_or(|list| list.contains(&(cell.row, cell.col)))
            }
        })
        .cloned()
        .collect()
}

/// The taxonomy entry best matching the record's task, dataset and metric
/// (mean token F1; ties keep the earlier entry). Unanswered attributes
/// score zero.
pub fn best_entry(record: &ExtractedRecord, taxonomy: &Taxonomy) -> (usize, f64) {
    let field = |name: &str| {
        record
            .attribute_text(name)
            .filter(|t| !is_placeholder(t))
            .unwrap_or("")
            .to_string()
    };
    let (task, dataset, metric) = (field(TASK), field(DATASET), field(METRIC));
    let score = |text: &str, target: &str| {
        if text.is_empty() {
            0.0
        } else {
            token_f1(text, target)
        }
    };
    let mut best = (0, -1.0);
    for (i, e) in taxonomy.entries.iter().enumerate() {
        let s =
            (score(&task, &e.task) + score(&dataset, &e.dataset) + score(&metric, &e.metric)) / 3.0;
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// Link one record, or `None` when it carries no number or matches too weakly.
pub fn match_leaderboard(
    record: &ExtractedRecord,
    paper: &str,
    taxonomy: &Taxonomy,
    cfg: &LinkConfig,
) -> Option<LinkedResult> {
    let cell = record.cell.clone()?;
    let score = extract_numeric(&cell.value_text)?;
    let (index, match_score) = best_entry(record, taxonomy);
    if match_score < cfg.min_match {
        return None;
    }
    Some(LinkedResult {
        entry: taxonomy.entries[index].clone(),
        entry_index: index,
        score,
        paper: paper.to_string(),
        table: record.table.clone().unwrap_or_default(),
        cell,
        match_score,
    })
}

/// The best-scoring candidate in the given direction; ties keep the first.
pub fn select_best(linked: &[LinkedResult], direction: Direction) -> Option<&LinkedResult> {
    let mut best: Option<&LinkedResult> = None;
    for candidate in linked {
        if best.is_none_or(|b| direction.improves(candidate.score, b.score)) {
            best = Some(candidate);
        }
    }
    best
}

/// One table's extracted records together with its grid.
pub struct TableRecords<'a> {
    pub grid: &'a GridTable,
    pub records: &'a [ExtractedRecord],
    pub candidates: Option<&'a [(usize, usize)]>,
}

/// Filter, link and keep at most one result per leaderboard for a paper,
/// in taxonomy order.
pub fn link_paper(
    paper: &str,
    tables: &[TableRecords],
    taxonomy: &Taxonomy,
    cfg: &LinkConfig,
) -> Vec<LinkedResult> {
    let mut by_entry: BTreeMap<usize, Vec<LinkedResult>> = BTreeMap::new();
    for t in tables {
        for record in filter_result_records(t.records, t.grid, t.candidates) {
            if let Some(link) = match_leaderboard(&record, paper, taxonomy, cfg) {
                by_entry.entry(link.entry_index).or_default().push(link);
            }
        }
    }
    by_entry
        .into_values()
        .filter_map(|links| {
            let direction = links[0].entry.direction;
            select_best(&links, direction).cloned()
        })
        .collect()
}

/// Run extraction over every table of a paper and link the results.
/// Tables without numeric cells are skipped; interrupted tables contribute
/// what was extracted before the failure.
pub fn extract_leaderboard(
    paper: &str,
    tables: &[(SourceTable, GridTable)],
    schema_plus: &ExtractionSchema,
    taxonomy: &Taxonomy,
    client: &dyn ModelClient,
    config: &EngineConfig,
    cfg: &LinkConfig,
) -> Vec<LinkedResult> {
    let mut extracted = Vec::new();
    for (source, grid) in tables {
        match run_table_extraction(source, grid, schema_plus, client, config) {
            Ok(session) => extracted.push((grid, session.accepted)),
            Err(EngineError::NoTargets(_)) => {}
            Err(EngineError::Interrupted(e)) => {
                log::warn!("{e}; using partial records");
                extracted.push((grid, e.session.accepted));
            }
            Err(e) => log::warn!("{}: {e}", source.id),
        }
    }
    let views: Vec<TableRecords> = extracted
        .iter()
        .map(|(grid, records)| TableRecords {
            grid,
            records,
            candidates: None,
        })
        .collect();
    link_paper(paper, &views, taxonomy, cfg)
}

/// A gold leaderboard result of a paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldResult {
    pub paper: String,
    pub task: String,
    pub dataset: String,
    pub metric: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardScore {
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_score: Prf,
    pub papers: usize,
}

type ResultKey = (String, String, String, String);

fn key(task: &str, dataset: &str, metric: &str, score: f64) -> ResultKey {
    (
        task.into(),
        dataset.into(),
        metric.into(),
        format!("{score}"),
    )
}

/// Exact (task, dataset, metric, score) matching, pooled over papers (micro)
/// and averaged per paper (macro) over every paper in either list.
pub fn score_leaderboards(pred: &[LinkedResult], gold: &[GoldResult]) -> LeaderboardScore {
    let mut papers: BTreeMap<&str, (HashSet<ResultKey>, HashSet<ResultKey>)> = BTreeMap::new();
    for p in pred {
        let e = &p.entry;
        papers
            .entry(&p.paper)
            .or_default()
            .0
            .insert(key(&e.task, &e.dataset, &e.metric, p.score));
    }
    for g in gold {
        papers
            .entry(&g.paper)
            .or_default()
            .1
            .insert(key(&g.task, &g.dataset, &g.metric, g.score));
    }
    let (mut hits, mut n_pred, mut n_gold) = (0, 0, 0);
    let mut per_paper = Vec::new();
    for (p, g) in papers.values() {
        let h = p.intersection(g).count();
        hits += h;
        n_pred += p.len();
        n_gold += g.len();
        per_paper.push(Prf::from_counts(h, p.len(), h, g.len()));
    }
    LeaderboardScore {
        micro: Prf::from_counts(hits, n_pred, hits, n_gold),
        macro_score: Prf::mean(&per_paper).unwrap_or_default(),
        papers: per_paper.len(),
    }
}
