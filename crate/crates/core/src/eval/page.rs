//! Page-level scoring with answers grounded to text nodes.

use super::{is_placeholder, token_f1, Prf};
use crate::table::TextNode;
use indexmap::IndexMap;
use serde::Serialize;

/// The node whose text best matches `value` by token F1; ties go to the
/// earliest node. Placeholders and values sharing no token with any node
/// select nothing.
pub fn select_node(value: &str, nodes: &[TextNode]) -> Option<usize> {
    if is_placeholder(value) {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, node) in nodes.iter().enumerate() {
        let score = token_f1(value, &node.text);
        if score > best.map_or(0.0, |(_, s)| s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

/// One page: its text nodes and predicted and gold attribute values.
#[derive(Debug, Clone, Default)]
pub struct PageCase {
    pub page_id: String,
    pub nodes: Vec<TextNode>,
    pub predicted: IndexMap<String, String>,
    pub gold: IndexMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageScore {
    pub pages: usize,
    pub per_attribute: IndexMap<String, Prf>,
    /// Mean over attributes.
    #[serde(flatten)]
    pub overall: Prf,
}

/// Per attribute, a page is a hit when prediction and gold ground to the
/// same node; precision is over pages with a grounded prediction, recall
/// over pages with a grounded gold value. Attributes are then averaged.
pub fn page_f1(pages: &[PageCase], attributes: &[String]) -> PageScore {
    let mut per_attribute = IndexMap::new();
    for attr in attributes {
        let (mut hits, mut n_pred, mut n_gold) = (0, 0, 0);
        for page in pages {
            let lookup = |m: &IndexMap<String, String>| {
                m.get(attr).and_then(|v| select_node(v, &page.nodes))
            };
            let pred = lookup(&page.predicted);
            let gold = lookup(&page.gold);
            n_pred += usize::from(pred.is_some());
            n_gold += usize::from(gold.is_some());
            hits += usize::from(pred.is_some() && pred == gold);
        }
        per_attribute.insert(attr.clone(), Prf::from_counts(hits, n_pred, hits, n_gold));
    }
    let scores: Vec<Prf> = per_attribute.values().copied().collect();
    PageScore {
        pages: pages.len(),
        overall: Prf::mean(&scores).unwrap_or_default(),
        per_attribute,
    }
}

/// Mean of per-vertical scores.
pub fn average_verticals(verticals: &[PageScore]) -> Prf {
    let overall: Vec<Prf> = verticals.iter().map(|v| v.overall).collect();
    Prf::mean(&overall).unwrap_or_default()
}
