//! Exact-match scoring of glass composition tuples.

use super::{is_placeholder, Prf};
use crate::engine::ExtractedRecord;
use crate::table::extract_numeric;
use serde::Serialize;
use std::collections::HashSet;
use std::hash::Hash;

pub const COMPOSITION_TYPE: &str = "Glass_Compound_Amount";
const MATERIAL: &str = "glass material/sample name/id/code";
const CONSTITUENT: &str = "constituent compound name";
const UNIT: &str = "unit";

/// (material, constituent, percentage, unit).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GlassTuple {
    pub material: String,
    pub constituent: String,
    /// The cell's numeric value, printed canonically.
    pub percentage: String,
    pub unit: String,
}

/// Composition tuples from records: the percentage comes from the cell's
/// number, the rest from attributes. Records without a number, of another
/// type, or failed are skipped; unanswered attributes become empty strings.
pub fn tuples_from_records(records: &[ExtractedRecord]) -> Vec<GlassTuple> {
    let attr = |r: &ExtractedRecord, name: &str| {
        r.attribute_text(name)
            .filter(|t| !is_placeholder(t))
            .map(|t| t.split_whitespace().collect::<Vec<_>>().join(" "))
            .unwrap_or_default()
    };
    records
        .iter()
        .filter(|r| !r.failed && r.type_name == COMPOSITION_TYPE)
        .filter_map(|r| {
            let text = r
                .cell
                .as_ref()
                .map(|c| c.value_text.as_str())
                .or(r.value.as_deref())?;
            let number = extract_numeric(text)?;
            Some(GlassTuple {
                material: attr(r, MATERIAL),
                constituent: attr(r, CONSTITUENT),
                percentage: number.to_string(),
                unit: attr(r, UNIT),
            })
        })
        .collect()
}

/// Set-style exact-match P/R/F1; duplicates collapse.
pub fn tuple_f1<T: Eq + Hash>(pred: &[T], gold: &[T]) -> Prf {
    let pred: HashSet<&T> = pred.iter().collect();
    let gold: HashSet<&T> = gold.iter().collect();
    let hits = pred.intersection(&gold).count();
    Prf::from_counts(hits, pred.len(), hits, gold.len())
}
