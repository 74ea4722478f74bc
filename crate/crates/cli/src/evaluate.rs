//! `evaluate` and `calibrate`.

use crate::dataset::{load_dataset, read_gold, read_records};
use crate::io::{pretty, write_atomic};
use anyhow::{bail, Context, Result};
use indexmap::IndexMap;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use tablex_core::engine::ExtractedRecord;
use tablex_core::eval::{
    calibrate_threshold, page_f1, score_tables, tuple_f1, tuples_from_records,
    AttributeMatchConfig, LabeledPair, PageCase, Prf,
};
use tablex_core::table::parse_html_page;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    TableF1,
    TupleF1,
    PageF1,
}

/// Attribute comparison given as `token_f1:<threshold>` or `em`.
pub fn parse_attr_match(spec: &str) -> Result<AttributeMatchConfig> {
    if spec.eq_ignore_ascii_case("em") || spec.eq_ignore_ascii_case("exact") {
        return Ok(AttributeMatchConfig::exact());
    }
    let threshold = match spec.split_once(':') {
        Some(("token_f1", t)) => t
            .parse::<f64>()
            .with_context(|| format!("bad threshold in `{spec}`"))?,
        None if spec == "token_f1" => AttributeMatchConfig::default().threshold,
        _ => bail!("attribute match must be `em` or `token_f1:<threshold>`, got `{spec}`"),
    };
    Ok(AttributeMatchConfig::token_f1(threshold)?)
}

pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub gold: PathBuf,
    pub metric: Metric,
    pub attr: AttributeMatchConfig,
    /// Dataset holding the HTML pages, for page-F1.
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TupleReport {
    pred_tuples: usize,
    gold_tuples: usize,
    #[serde(flatten)]
    score: Prf,
}

fn prf_line(name: &str, s: &Prf) -> String {
    format!(
        "{name:<24} P={:.4} R={:.4} F1={:.4}\n",
        s.precision, s.recall, s.f1
    )
}

fn page_cases(
    pred: &[ExtractedRecord],
    gold: &[ExtractedRecord],
    dataset: &Path,
) -> Result<Vec<PageCase>> {
    let by_table = |records: &[ExtractedRecord]| {
        let mut map: BTreeMap<String, IndexMap<String, String>> = BTreeMap::new();
        for r in records.iter().filter(|r| !r.failed) {
            let attrs = map.entry(r.table.clone().unwrap_or_default()).or_default();
            for (k, v) in &r.attributes {
                if let Some(text) = v.as_text() {
                    attrs.insert(k.clone(), text.to_string());
                }
            }
        }
        map
    };
    let (mut predicted, mut gold) = (by_table(pred), by_table(gold));
    let mut cases = Vec::new();
    for doc in load_dataset(dataset)? {
        for table in &doc.tables {
            let Some(gold_attrs) = gold.remove(&table.id) else {
                continue;
            };
            let raw = std::fs::read_to_string(&table.path)
                .with_context(|| format!("reading {}", table.path.display()))?;
            cases.push(PageCase {
                page_id: table.id.clone(),
                nodes: parse_html_page(&raw),
                predicted: predicted.remove(&table.id).unwrap_or_default(),
                gold: gold_attrs,
            });
        }
    }
    if !gold.is_empty() {
        let missing: Vec<_> = gold.keys().cloned().collect();
        bail!(
            "gold pages not found in the dataset: {}",
            missing.join(", ")
        );
    }
    Ok(cases)
}

/// Score predictions and return the text summary printed to stdout.
pub fn run_evaluate(args: &EvaluateArgs) -> Result<String> {
    let pred = read_records(&args.pred, None)?;
    let gold = read_gold(&args.gold)?;
    let (json, summary) = match args.metric {
        Metric::TableF1 => {
            let report = score_tables(&pred, &gold, &args.attr)?;
            (serde_json::to_value(&report)?, report.summary())
        }
        Metric::TupleF1 => {
            let (p, g) = (tuples_from_records(&pred), tuples_from_records(&gold));
            let report = TupleReport {
                pred_tuples: p.len(),
                gold_tuples: g.len(),
                score: tuple_f1(&p, &g),
            };
            (
                serde_json::to_value(&report)?,
                prf_line("tuple", &report.score),
            )
        }
        Metric::PageF1 => {
            let dataset = args
                .dataset
                .as_deref()
                .context("page-F1 needs --dataset with the pages")?;
            let cases = page_cases(&pred, &gold, dataset)?;
            let mut attributes: Vec<String> = Vec::new();
            for case in &cases {
                for k in case.gold.keys() {
                    if k != "webpage title" && !attributes.contains(k) {
                        attributes.push(k.clone());
                    }
                }
            }
            let report = page_f1(&cases, &attributes);
            let mut text = String::new();
            for (attr, s) in &report.per_attribute {
                text.push_str(&prf_line(attr, s));
            }
            text.push_str(&prf_line("overall", &report.overall));
            (serde_json::to_value(&report)?, text)
        }
    };
    if let Some(out) = &args.out {
        write_atomic(out, &pretty(&json)?)?;
    }
    Ok(summary)
}

/// Calibrate the token-F1 threshold from labelled pairs in a JSONL file.
pub fn run_calibrate(pairs: &Path, out: Option<&Path>) -> Result<String> {
    let text =
        std::fs::read_to_string(pairs).with_context(|| format!("reading {}", pairs.display()))?;
    let pairs: Vec<LabeledPair> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("line {}", i + 1)))
        .collect::<Result<_>>()?;
    let calibration = calibrate_threshold(&pairs)?;
    let report = pretty(&calibration)?;
    if let Some(out) = out {
        write_atomic(out, &report)?;
    }
    Ok(report)
}
