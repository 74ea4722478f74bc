//! BM25 ranking of document paragraphs against a table.

use crate::table::{GridTable, SourceTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// BM25 score of every paragraph, in input order.
///
/// idf(t) = ln(1 + (N - n(t) + 0.5) / (n(t) + 0.5)); repeated query terms
/// contribute once per occurrence.
pub fn bm25_scores(query: &str, paragraphs: &[String], params: Bm25Params) -> Vec<f64> {
    let docs: Vec<Vec<String>> = paragraphs.iter().map(|p| tokenize(p)).collect();
    let n_docs = docs.len() as f64;
    if docs.is_empty() {
        return Vec::new();
    }
    let avg_len = docs.iter().map(Vec::len).sum::<usize>() as f64 / n_docs;
    let query_terms = tokenize(query);

    let doc_freq = |term: &str| docs.iter().filter(|d| d.iter().any(|t| t == term)).count() as f64;
    let idfs: Vec<f64> = query_terms
        .iter()
        .map(|t| {
            let n = doc_freq(t);
            (1.0 + (n_docs - n + 0.5) / (n + 0.5)).ln()
        })
        .collect();

    docs.iter()
        .map(|doc| {
            if avg_len == 0.0 {
                return 0.0;
            }
            let len_norm = 1.0 - params.b + params.b * doc.len() as f64 / avg_len;
            query_terms
                .iter()
                .zip(&idfs)
                .map(|(term, idf)| {
                    let tf = doc.iter().filter(|t| *t == term).count() as f64;
                    idf * tf * (params.k1 + 1.0) / (tf + params.k1 * len_norm)
                })
                .sum()
        })
        .collect()
}

/// Indices of the top `k` paragraphs, best first; ties keep document order.
pub fn bm25_rank_indices(
    query: &str,
    paragraphs: &[String],
    k: usize,
    params: Bm25Params,
) -> Vec<usize> {
    let scores = bm25_scores(query, paragraphs, params);
    let mut order: Vec<usize> = (0..paragraphs.len()).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    order.truncate(k);
    order
}

/// The top `k` paragraphs for `query` (all of them when `k` exceeds the count).
pub fn bm25_rank<'a>(query: &str, paragraphs: &'a [String], k: usize) -> Vec<&'a str> {
    bm25_rank_indices(query, paragraphs, k, Bm25Params::default())
        .into_iter()
        .map(|i| paragraphs[i].as_str())
        .collect()
}

/// Retrieval query for a table: its caption (when used) and every cell's text.
pub fn table_query(table: &SourceTable, grid: Option<&GridTable>, with_caption: bool) -> String {
    let mut parts = Vec::new();
    if with_caption {
        if let Some(c) = &table.caption {
            parts.push(c.clone());
        }
    }
    match grid {
        Some(g) => parts.extend(
            g.cells
                .iter()
                .filter(|c| !c.plain_text.is_empty())
                .map(|c| c.plain_text.clone()),
        ),
        None => parts.push(table.raw.clone()),
    }
    parts.join(" ")
}
