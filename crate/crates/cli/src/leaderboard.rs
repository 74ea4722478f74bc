//! `leaderboard`: extract result records from papers and link them to a
//! leaderboard taxonomy.

use crate::dataset::{load_dataset, read_records};
use crate::extract::{load_positions, Model};
use crate::io::{jsonl_of, pretty, write_atomic};
use crate::Outcome;
use anyhow::{Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use tablex_core::engine::{
    run_table_extraction, EngineConfig, EngineError, ExtractedRecord, TranscriptEntry,
};
use tablex_core::leaderboard::{
    link_paper, score_leaderboards, GoldResult, LinkConfig, TableRecords, Taxonomy,
};
use tablex_core::schema::ExtractionSchema;
use tablex_core::table::{GridTable, TableFormat};

pub struct LeaderboardArgs {
    pub papers: PathBuf,
    pub taxonomy: PathBuf,
    pub schema: ExtractionSchema,
    /// Link these records instead of running extraction.
    pub records: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub link: LinkConfig,
    pub engine: EngineConfig,
    pub out: PathBuf,
}

fn read_gold_results(path: &Path) -> Result<Vec<GoldResult>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

struct PaperTable {
    id: String,
    grid: GridTable,
    records: Vec<ExtractedRecord>,
}

pub fn run_leaderboard(args: &LeaderboardArgs, model: Option<&Model>) -> Result<Outcome> {
    let taxonomy = Taxonomy::load(&args.taxonomy)?;
    let candidates = args.candidates.as_deref().map(load_positions).transpose()?;
    let mut supplied: Option<BTreeMap<String, Vec<ExtractedRecord>>> = match &args.records {
        Some(path) => {
            let mut map: BTreeMap<String, Vec<ExtractedRecord>> = BTreeMap::new();
            for r in read_records(path, None)? {
                map.entry(r.table.clone().unwrap_or_default())
                    .or_default()
                    .push(r);
            }
            Some(map)
        }
        None => None,
    };
    let mut outcome = Outcome::Success;
    let mut transcript: Vec<TranscriptEntry> = Vec::new();
    let mut linked = Vec::new();
    for doc in load_dataset(&args.papers)? {
        let mut tables = Vec::new();
        for file in doc.tables.iter().filter(|t| t.format != TableFormat::Html) {
            let loaded = file.load(&doc.context).and_then(|s| {
                let grid = s
                    .parse()
                    .with_context(|| format!("parsing {}", file.path.display()))?;
                Ok((s, grid))
            });
            let (source, grid) = match loaded {
                Ok(pair) => pair,
                Err(e) => {
                    log::error!("{e:#}");
                    outcome = Outcome::Partial;
                    continue;
                }
            };
            let records = match supplied.as_mut() {
                Some(map) => map.remove(&file.id).unwrap_or_default(),
                None => {
                    let client = model.context("a model is needed unless --records is given")?;
                    match run_table_extraction(
                        &source,
                        &grid,
                        &args.schema,
                        client.client.as_ref(),
                        &args.engine,
                    ) {
                        Ok(session) => {
                            transcript.extend(session.transcript);
                            session.accepted
                        }
                        Err(EngineError::NoTargets(_)) => Vec::new(),
                        Err(EngineError::Interrupted(e)) => {
                            log::warn!("{}: {}; using partial records", file.id, e.error);
                            outcome = Outcome::Partial;
                            transcript.extend(e.session.transcript);
                            e.session.accepted
                        }
                        Err(e) => {
                            log::error!("{}: {e}", file.id);
                            outcome = Outcome::Partial;
                            Vec::new()
                        }
                    }
                }
            };
            tables.push(PaperTable {
                id: file.id.clone(),
                grid,
                records,
            });
        }
        let views: Vec<TableRecords> = tables
            .iter()
            .map(|t| TableRecords {
                grid: &t.grid,
                records: &t.records,
                candidates: candidates
                    .as_ref()
                    .and_then(|c| c.get(&t.id))
                    .map(Vec::as_slice),
            })
            .collect();
        linked.extend(link_paper(&doc.id, &views, &taxonomy, &args.link));
    }
    if let Some(rest) = supplied.filter(|m| !m.is_empty()) {
        log::warn!(
            "records for unknown tables ignored: {}",
            rest.keys().cloned().collect::<Vec<_>>().join(", ")
        );
    }
    write_atomic(&args.out.join("linked.jsonl"), &jsonl_of(&linked)?)?;
    if args.records.is_none() {
        write_atomic(&args.out.join("transcript.jsonl"), &jsonl_of(&transcript)?)?;
    }
    if let Some(gold) = &args.gold {
        let score = score_leaderboards(&linked, &read_gold_results(gold)?);
        let report = pretty(&score)?;
        write_atomic(&args.out.join("report.json"), &report)?;
        print!("{report}");
    } else {
        println!("{} linked results", linked.len());
    }
    Ok(outcome)
}
