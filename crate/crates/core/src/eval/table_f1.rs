//! Attribute matching, record alignment and Table-F1.

use super::{harmonic, is_placeholder, AttributeMatchConfig, EvalError};
use crate::engine::{AttrValue, ExtractedRecord};
use indexmap::IndexMap;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

/// Minimum sub-attribute F1 for two mapping answers to match.
const MAPPING_MATCH_F1: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeMatch {
    Matched,
    Unmatched,
    /// One side is text and the other a mapping.
    KindMismatch,
}

impl AttributeMatch {
    pub fn is_match(self) -> bool {
        self == AttributeMatch::Matched
    }
}

fn map_entries(map: &IndexMap<String, String>) -> Vec<(&str, &str)> {
    map.iter()
        .filter(|(k, _)| !is_placeholder(k))
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect()
}

/// Whether an answer carries no information.
pub(crate) fn is_empty_value(value: &AttrValue) -> bool {
    match value {
        AttrValue::Text(t) => super::normalize_text(t).is_empty(),
        AttrValue::Map(m) => map_entries(m).is_empty(),
    }
}

/// Compare two answers. Mappings match when at least half of their
/// sub-attributes pair up (greedy, one-to-one, key and value both matching).
pub fn match_attribute(
    pred: &AttrValue,
    gold: &AttrValue,
    cfg: &AttributeMatchConfig,
) -> AttributeMatch {
    let verdict = |ok: bool| {
        if ok {
            AttributeMatch::Matched
        } else {
            AttributeMatch::Unmatched
        }
    };
    match (pred, gold) {
        (AttrValue::Text(p), AttrValue::Text(g)) => verdict(cfg.text_matches(p, g)),
        (AttrValue::Map(p), AttrValue::Map(g)) => {
            let p = map_entries(p);
            let g = map_entries(g);
            if p.is_empty() && g.is_empty() {
                return AttributeMatch::Matched;
            }
            let mut used = vec![false; g.len()];
            let mut hits = 0;
            for (pk, pv) in &p {
                let found = g.iter().enumerate().position(|(i, (gk, gv))| {
                    !used[i] && cfg.text_matches(pk, gk) && cfg.text_matches(pv, gv)
                });
                if let Some(i) = found {
                    used[i] = true;
                    hits += 1;
                }
            }
            let f1 = 2.0 * hits as f64 / (p.len() + g.len()) as f64;
            verdict(f1 >= MAPPING_MATCH_F1)
        }
        _ => {
            if is_empty_value(pred) && is_empty_value(gold) {
                return AttributeMatch::Matched;
            }
            log::debug!("attribute kind mismatch: {pred:?} vs {gold:?}");
            AttributeMatch::KindMismatch
        }
    }
}

/// Record pairing within one table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gold: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum CellKey {
    Position(usize, usize),
    Value(String, usize),
}

fn keys(records: &[&ExtractedRecord], by_position: bool) -> Vec<CellKey> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    records
        .iter()
        .map(|r| match (&r.cell, by_position) {
            (Some(c), true) => CellKey::Position(c.row, c.col),
            _ => {
                let text = r
                    .cell
                    .as_ref()
                    .map(|c| c.value_text.clone())
                    .or_else(|| r.value.clone())
                    .unwrap_or_default();
                let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
                let n = seen.entry(text.clone()).or_default();
                *n += 1;
                CellKey::Value(text, *n - 1)
            }
        })
        .collect()
}

/// Pair records by cell position, or by value text and occurrence index
/// when either side lacks positions. Page records (single, no cell) pair
/// with each other.
pub fn align_records(pred: &[&ExtractedRecord], gold: &[&ExtractedRecord]) -> Alignment {
    let no_cells = pred
        .iter()
        .chain(gold)
        .all(|r| r.cell.is_none() && r.value.is_none());
    if no_cells {
        let n = pred.len().min(gold.len());
        return Alignment {
            pairs: (0..n).map(|i| (i, i)).collect(),
            unmatched_pred: (n..pred.len()).collect(),
            unmatched_gold: (n..gold.len()).collect(),
        };
    }
    let by_position = pred.iter().chain(gold).all(|r| r.cell.is_some());
    let pred_keys = keys(pred, by_position);
    let gold_keys = keys(gold, by_position);
    let mut gold_index: HashMap<&CellKey, usize> = HashMap::new();
    for (i, k) in gold_keys.iter().enumerate() {
        if gold_index.contains_key(k) {
            log::warn!("duplicate gold cell {k:?}; keeping the first");
        } else {
            gold_index.insert(k, i);
        }
    }
    let mut alignment = Alignment::default();
    let mut gold_used = vec![false; gold.len()];
    for (i, k) in pred_keys.iter().enumerate() {
        match gold_index.get(k) {
            Some(&g) if !gold_used[g] => {
                gold_used[g] = true;
                alignment.pairs.push((i, g));
            }
            Some(_) => {
                log::warn!("duplicate predicted cell {k:?}; keeping the first");
                alignment.unmatched_pred.push(i);
            }
            None => alignment.unmatched_pred.push(i),
        }
    }
    alignment.unmatched_gold = (0..gold.len()).filter(|g| !gold_used[*g]).collect();
    alignment
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TableScore {
    pub correct_pred: usize,
    pub total_pred: usize,
    pub total_gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl TableScore {
    pub fn from_counts(correct: usize, total_pred: usize, total_gold: usize) -> Self {
        let ratio = |d: usize| {
            if d == 0 {
                0.0
            } else {
                correct as f64 / d as f64
            }
        };
        let precision = ratio(total_pred);
        let recall = ratio(total_gold);
        Self {
            correct_pred: correct,
            total_pred,
            total_gold,
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

fn answered(record: &ExtractedRecord) -> impl Iterator<Item = (&String, &AttrValue)> {
    record.attributes.iter().filter(|(_, v)| !is_empty_value(v))
}

fn denominator(record: &ExtractedRecord, cfg: &AttributeMatchConfig) -> usize {
    answered(record).count() + usize::from(cfg.count_type)
}

/// Attribute-level P/R/F1 for one table.
///
/// A pair earns credit only when the types agree; then every attribute
/// answered on both sides that matches counts once. Unanswered attributes
/// are left out of both denominators. Failed predictions are ignored.
pub fn table_f1(
    pred: &[ExtractedRecord],
    gold: &[ExtractedRecord],
    cfg: &AttributeMatchConfig,
) -> TableScore {
    let pred: Vec<&ExtractedRecord> = pred.iter().filter(|r| !r.failed).collect();
    let gold: Vec<&ExtractedRecord> = gold.iter().collect();
    let alignment = align_records(&pred, &gold);
    let total_pred: usize = pred.iter().map(|r| denominator(r, cfg)).sum();
    let total_gold: usize = gold.iter().map(|r| denominator(r, cfg)).sum();
    let mut correct = 0;
    for (p, g) in alignment.pairs {
        let (p, g) = (pred[p], gold[g]);
        if p.type_name != g.type_name {
            continue;
        }
        correct += usize::from(cfg.count_type);
        for (name, value) in answered(p) {
            let hit = g
                .attributes
                .get(name)
                .filter(|gv| !is_empty_value(gv))
                .is_some_and(|gv| match_attribute(value, gv, cfg).is_match());
            correct += usize::from(hit);
        }
    }
    TableScore::from_counts(correct, total_pred, total_gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroScore {
    pub tables: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted mean of per-table precision, recall and F1.
pub fn macro_average(scores: &[TableScore]) -> Result<MacroScore, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = scores.len() as f64;
    Ok(MacroScore {
        tables: scores.len(),
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub tables: IndexMap<String, TableScore>,
    #[serde(rename = "macro")]
    pub macro_score: MacroScore,
    /// Pooled counts over all tables.
    pub micro: TableScore,
}

impl BenchmarkReport {
    /// Aligned plain-text table: one line per table, then macro and micro.
    pub fn summary(&self) -> String {
        let width = self
            .tables
            .keys()
            .map(|k| k.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n",
            "table", "correct", "pred", "gold", "P", "R", "F1"
        );
        for (id, s) in &self.tables {
            out.push_str(&format!(
                "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7.4}  {:>7.4}  {:>7.4}\n",
                id, s.correct_pred, s.total_pred, s.total_gold, s.precision, s.recall, s.f1
            ));
        }
        let m = &self.macro_score;
        out.push_str(&format!(
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7.4}  {:>7.4}  {:>7.4}\n",
            "macro", "", "", "", m.precision, m.recall, m.f1
        ));
        let u = &self.micro;
        out.push_str(&format!(
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7.4}  {:>7.4}  {:>7.4}\n",
            "micro", u.correct_pred, u.total_pred, u.total_gold, u.precision, u.recall, u.f1
        ));
        out
    }
}

/// Group records by table id, score each table and aggregate.
///
/// The predicted and gold table ids must coincide.
pub fn score_tables(
    pred: &[ExtractedRecord],
    gold: &[ExtractedRecord],
    cfg: &AttributeMatchConfig,
) -> Result<BenchmarkReport, EvalError> {
    let group = |records: &[ExtractedRecord]| {
        let mut map: IndexMap<String, Vec<ExtractedRecord>> = IndexMap::new();
        for r in records {
            map.entry(r.table.clone().unwrap_or_default())
                .or_default()
                .push(r.clone());
        }
        map
    };
    let pred_groups = group(pred);
    let mut gold_groups = group(gold);
    gold_groups.sort_keys();
    let pred_ids: BTreeSet<&String> = pred_groups.keys().collect();
    let gold_ids: BTreeSet<&String> = gold_groups.keys().collect();
    if pred_ids != gold_ids {
        return Err(EvalError::TableMismatch {
            only_pred: pred_ids
                .difference(&gold_ids)
                .map(|s| s.to_string())
                .collect(),
            only_gold: gold_ids
                .difference(&pred_ids)
                .map(|s| s.to_string())
                .collect(),
        });
    }
    let tables: IndexMap<String, TableScore> = gold_groups
        .iter()
        .map(|(id, g)| (id.clone(), table_f1(&pred_groups[id], g, cfg)))
        .collect();
    let scores: Vec<TableScore> = tables.values().copied().collect();
    let macro_score = macro_average(&scores)?;
    let micro = TableScore::from_counts(
        scores.iter().map(|s| s.correct_pred).sum(),
        scores.iter().map(|s| s.total_pred).sum(),
        scores.iter().map(|s| s.total_gold).sum(),
    );
    Ok(BenchmarkReport {
        tables,
        macro_score,
        micro,
    })
}
