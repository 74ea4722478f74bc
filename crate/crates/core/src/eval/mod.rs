//! Scoring extracted records against gold annotations.

mod calibrate;
mod page;
mod table_f1;
mod tuple;

pub use calibrate::{calibrate_threshold, Calibration, LabeledPair, THRESHOLD_GRID_STEPS};
pub use page::{average_verticals, page_f1, select_node, PageCase, PageScore};
pub use table_f1::{
    align_records, macro_average, match_attribute, score_tables, table_f1, Alignment,
    AttributeMatch, BenchmarkReport, MacroScore, TableScore,
};
pub use tuple::{tuple_f1, tuples_from_records, GlassTuple};

use crate::schema::{CELL_PLACEHOLDER, PAGE_PLACEHOLDER};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("nothing to score")]
    Empty,
    #[error("table ids differ: only predicted {only_pred:?}, only gold {only_gold:?}")]
    TableMismatch {
        only_pred: Vec<String>,
        only_gold: Vec<String>,
    },
    #[error("invalid threshold {0}")]
    Threshold(f64),
}

/// How a predicted text answer is compared to the gold one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    TokenF1Threshold,
    ExactMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeMatchConfig {
    pub mode: MatchMode,
    /// Minimum token F1 for a match (inclusive).
    pub threshold: f64,
    /// Count the record type as one attribute in every record.
    pub count_type: bool,
}

impl Default for AttributeMatchConfig {
    fn default() -> Self {
        Self {
            mode: MatchMode::TokenF1Threshold,
            threshold: 0.25,
            count_type: true,
        }
    }
}

impl AttributeMatchConfig {
    pub fn exact() -> Self {
        Self {
            mode: MatchMode::ExactMatch,
            ..Self::default()
        }
    }

    pub fn token_f1(threshold: f64) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(EvalError::Threshold(threshold));
        }
        Ok(Self {
            threshold,
            ..Self::default()
        })
    }

    /// Whether two text answers match under this configuration.
    pub fn text_matches(&self, pred: &str, gold: &str) -> bool {
        match self.mode {
            MatchMode::TokenF1Threshold => token_f1(pred, gold) >= self.threshold,
            MatchMode::ExactMatch => normalize_text(pred) == normalize_text(gold),
        }
    }
}

/// Placeholder answers ("xx", "<NULL>") stand for "no answer".
pub fn is_placeholder(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == CELL_PLACEHOLDER || t.eq_ignore_ascii_case(PAGE_PLACEHOLDER)
}

/// Lowercased alphanumeric tokens; placeholders normalize to no tokens.
pub fn normalize_text(s: &str) -> Vec<String> {
    if is_placeholder(s) {
        return Vec::new();
    }
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Token overlap counts: (shared tokens as a multiset, pred tokens, gold tokens).
pub fn token_overlap(pred: &str, gold: &str) -> (usize, usize, usize) {
    let p = normalize_text(pred);
    let g = normalize_text(gold);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0;
    for t in &p {
        if let Some(n) = counts.get_mut(t.as_str()).filter(|n| **n > 0) {
            *n -= 1;
            common += 1;
        }
    }
    (common, p.len(), g.len())
}

/// Bag-of-tokens F1. Both sides empty give 1, one empty side gives 0.
pub fn token_f1(pred: &str, gold: &str) -> f64 {
    match token_overlap(pred, gold) {
        (_, 0, 0) => 1.0,
        (_, 0, _) | (_, _, 0) => 0.0,
        (c, p, g) => 2.0 * c as f64 / (p + g) as f64,
    }
}

/// Precision, recall and F1 of a count-based comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Zero denominators give zero.
    pub fn from_counts(
        correct_pred: usize,
        total_pred: usize,
        correct_gold: usize,
        total_gold: usize,
    ) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(correct_pred, total_pred);
        let recall = ratio(correct_gold, total_gold);
        Self {
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }

    pub fn mean(items: &[Prf]) -> Option<Prf> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        Some(Prf {
            precision: items.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: items.iter().map(|s| s.recall).sum::<f64>() / n,
            f1: items.iter().map(|s| s.f1).sum::<f64>() / n,
        })
    }
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("F1-score"), vec!["f1", "score"]);
        assert!(normalize_text("xx").is_empty());
        assert!(normalize_text("<NULL>").is_empty());
        assert_eq!(normalize_text("SQuAD  v1.1"), vec!["squad", "v1", "1"]);
    }

    #[test]
    fn token_f1_examples() {
        assert!((token_f1("macro F1", "F1") - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(token_f1("test", "test"), 1.0);
        assert_eq!(token_f1("number of parameters", "# params"), 0.0);
        assert_eq!(token_f1("xx", "<NULL>"), 1.0);
        assert_eq!(token_f1("xx", "F1"), 0.0);
        // multiset overlap: one shared "a"
        assert_eq!(token_overlap("a a b", "a c"), (1, 3, 2));
    }

    #[test]
    fn threshold_is_inclusive() {
        let cfg = AttributeMatchConfig::default();
        // 2*1/(4+4) = 0.25
        assert!(cfg.text_matches("a b c d", "a x y z"));
        assert!(!cfg.text_matches("a b c d e", "a x y z w"));
        assert!(AttributeMatchConfig::token_f1(1.5).is_err());
    }

    #[test]
    fn exact_mode_ignores_case_and_punctuation_only() {
        let cfg = AttributeMatchConfig::exact();
        assert!(cfg.text_matches("SQuAD-v1.1", "squad v1 1"));
        assert!(!cfg.text_matches("dev F1", "F1"));
    }
}
