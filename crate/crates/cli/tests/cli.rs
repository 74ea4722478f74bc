mod common;

use common::{run_tablex, simulated_model};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use tablex::extract::{run_extract, ExtractSettings, Mode, Model};
use tablex::manifest::ModelInfo;
use tablex_core::engine::{
    read_transcript, CompletionRequest, EngineConfig, FnClient, ModelClient,
};

fn fixture_dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay_dataset")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn settings(
    dataset: &Path,
    schema: &str,
    mode: Mode,
    out: &Path,
    distill: bool,
) -> ExtractSettings {
    ExtractSettings {
        dataset: dataset.to_path_buf(),
        schema_label: schema.into(),
        schema: tablex_core::schema::bundled(schema).unwrap(),
        mode,
        engine: EngineConfig::default(),
        out: out.to_path_buf(),
        workers: 1,
        dump_prompt: None,
        targets: None,
        distill,
    }
}

fn model(client: impl ModelClient + 'static) -> Model {
    Model {
        client: Arc::new(client),
        info: ModelInfo {
            kind: "simulated".into(),
            name: "test".into(),
            endpoint: None,
        },
    }
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn parse_continues_past_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("t.csv");
    std::fs::write(&good, "a|b\nx|1.5\n").unwrap();
    let out = run_tablex(&["parse", s(&good), s(&dir.path().join("missing.tex"))]).unwrap();
    assert_eq!(code(&out), 1);
    let dumped: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(dumped[0]["n_rows"], 2);
    assert!(dumped[1]["error"].is_string());

    let out = run_tablex(&["detect", s(&good)]).unwrap();
    assert_eq!(code(&out), 0);
    let dumped: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        dumped["targets"][0],
        serde_json::json!({"row": 1, "col": 1, "value": "1.5"})
    );
}

#[test]
fn missing_endpoint_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tablex(&[
        "extract",
        "--dataset",
        s(&fixture_dataset()),
        "--schema",
        "ml",
        "--out",
        s(dir.path()),
    ])
    .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("TABLEX_ENDPOINT"));
}

#[test]
fn interrupted_runs_resume_to_the_same_records() {
    let dataset = fixture_dataset();
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    run_extract(
        &settings(&dataset, "ml", Mode::FullTable, &full, false),
        &model(simulated_model(&dataset)),
    )
    .unwrap();
    let transcript = full.join("transcript.jsonl");
    let entries = read_transcript(&transcript).unwrap();
    let manifest = json(&full.join("manifest.json"));
    assert_eq!(
        manifest["totals"]["client_calls"].as_u64().unwrap() as usize,
        entries.len()
    );

    // Drop the calls for one table so its replay fails.
    let missing = std::fs::read_to_string(dataset.join("paper_b/table_2.csv")).unwrap();
    let truncated = dir.path().join("truncated.jsonl");
    let kept: String = std::fs::read_to_string(&transcript)
        .unwrap()
        .lines()
        .filter(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            !v["prompt"].as_str().unwrap().contains(missing.trim_end())
        })
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&truncated, kept).unwrap();

    let resumed = dir.path().join("resumed");
    let args = |t: &Path| {
        vec![
            "extract".to_string(),
            "--dataset".into(),
            s(&dataset).into(),
            "--schema".into(),
            "ml".into(),
            "--replay".into(),
            s(t).into(),
            "--out".into(),
            s(&resumed).into(),
        ]
    };
    let first = run_tablex(
        &args(&truncated)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    )
    .unwrap();
    assert_eq!(code(&first), 1);
    let manifest = json(&resumed.join("manifest.json"));
    assert_eq!(manifest["tables"]["paper_b/table_2"]["status"], "failed");
    assert_eq!(manifest["tables"]["paper_a/table_1"]["status"], "complete");

    // The second run re-runs only the failed table.
    let second = run_tablex(
        &args(&transcript)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    )
    .unwrap();
    assert_eq!(
        code(&second),
        0,
        "{}",
        String::from_utf8_lossy(&second.stderr)
    );
    assert_eq!(
        std::fs::read(resumed.join("records.jsonl")).unwrap(),
        std::fs::read(full.join("records.jsonl")).unwrap()
    );
    let manifest = json(&resumed.join("manifest.json"));
    assert_eq!(manifest["tables"]["paper_b/table_2"]["status"], "complete");
}

#[test]
fn distill_export_writes_condensed_examples() {
    let dataset = fixture_dataset();
    let dir = tempfile::tempdir().unwrap();
    let recorded = dir.path().join("recorded");
    run_extract(
        &settings(&dataset, "ml", Mode::PerCell, &recorded, true),
        &model(simulated_model(&dataset)),
    )
    .unwrap();
    let out = dir.path().join("distill");
    let run = run_tablex(&[
        "distill-export",
        "--dataset",
        s(&dataset),
        "--schema",
        "ml",
        "--replay",
        s(&recorded.join("transcript.jsonl")),
        "--out",
        s(&out),
    ])
    .unwrap();
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let examples = std::fs::read_to_string(out.join("examples.jsonl")).unwrap();
    let records = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(examples.lines().count(), records.lines().count());
    assert!(examples.lines().count() > 0);
    for l in examples.lines() {
        let v: Value = serde_json::from_str(l).unwrap();
        assert!(v["input"].as_str().unwrap().contains("<select>"));
        let output: Value = serde_json::from_str(v["output"].as_str().unwrap()).unwrap();
        assert_eq!(output["type"], "Other");
    }
    assert_eq!(
        examples,
        std::fs::read_to_string(recorded.join("examples.jsonl")).unwrap()
    );
}

#[test]
fn distill_export_of_an_empty_dataset_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("empty");
    std::fs::create_dir(&dataset).unwrap();
    let transcript = dir.path().join("t.jsonl");
    std::fs::write(&transcript, "").unwrap();
    let out = dir.path().join("out");
    let run = run_tablex(&[
        "distill-export",
        "--dataset",
        s(&dataset),
        "--schema",
        "discomat",
        "--replay",
        s(&transcript),
        "--out",
        s(&out),
    ])
    .unwrap();
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(
        std::fs::read_to_string(out.join("examples.jsonl")).unwrap(),
        ""
    );
}

#[test]
fn evaluate_and_calibrate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.jsonl");
    let gold = dir.path().join("gold.jsonl");
    let rec = |table: &str| {
        format!("{{\"table\": \"{table}\", \"cell\": {{\"row\": 1, \"col\": 1, \"value\": \"3.5\"}}, \"value\": \"3.5\", \"type\": \"Other\"}}\n")
    };
    std::fs::write(&pred, rec("d/table_1")).unwrap();
    std::fs::write(&gold, rec("d/table_1")).unwrap();
    let report = dir.path().join("report.json");
    let ok = run_tablex(&[
        "evaluate",
        "--pred",
        s(&pred),
        "--gold",
        s(&gold),
        "--out",
        s(&report),
    ])
    .unwrap();
    assert_eq!(code(&ok), 0);
    assert_eq!(json(&report)["micro"]["f1"], 1.0);

    std::fs::write(&gold, rec("d/table_2")).unwrap();
    let mismatch = run_tablex(&["evaluate", "--pred", s(&pred), "--gold", s(&gold)]).unwrap();
    assert_eq!(code(&mismatch), 2);

    let pairs = dir.path().join("pairs.jsonl");
    std::fs::write(&pairs, "").unwrap();
    assert_eq!(
        code(&run_tablex(&["calibrate", "--pairs", s(&pairs)]).unwrap()),
        2
    );
    std::fs::write(
        &pairs,
        "{\"pred\": \"a b\", \"gold\": \"a b\", \"match\": true}\n{\"pred\": \"a\", \"gold\": \"c\", \"match\": false}\n",
    )
    .unwrap();
    let cal = run_tablex(&["calibrate", "--pairs", s(&pairs)]).unwrap();
    assert_eq!(code(&cal), 0);
    let v: Value = serde_json::from_slice(&cal.stdout).unwrap();
    assert_eq!(v["meta_f1"], 1.0);
}

const PAGE: &str = "<html><head><title>Heat (1995)</title></head><body>\n<h1>Heat</h1><p>Directed by</p><p>Michael Mann</p>\n<span>Crime</span><span>Rated R</span></body></html>\n";

#[test]
fn page_extraction_and_page_f1() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("pages");
    let site = dataset.join("site");
    std::fs::create_dir_all(&site).unwrap();
    std::fs::write(site.join("table_1.html"), PAGE).unwrap();
    std::fs::write(
        site.join("gold.jsonl"),
        "{\"table\": \"table_1\", \"type\": \"movie\", \"webpage title\": \"Heat (1995)\", \"title\": \"Heat\", \"director\": \"Michael Mann\", \"genre\": \"Crime\", \"rating\": \"R\"}\n",
    )
    .unwrap();
    let client = FnClient(|_: &CompletionRequest| {
        Ok(" \"Heat\", \"director\": \"Michael Mann\", \"genre\": \"Drama\", \"rating\": \"<NULL>\"}\n".to_string())
    });
    let recorded = dir.path().join("recorded");
    run_extract(
        &settings(&dataset, "swde_movie", Mode::Page, &recorded, false),
        &model(client),
    )
    .unwrap();

    let out = dir.path().join("out");
    let run = run_tablex(&[
        "extract",
        "--dataset",
        s(&dataset),
        "--schema",
        "swde_movie",
        "--replay",
        s(&recorded.join("transcript.jsonl")),
        "--out",
        s(&out),
    ])
    .unwrap();
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let record: Value = serde_json::from_str(
        std::fs::read_to_string(out.join("records.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();
    assert_eq!(record["webpage title"], "Heat (1995)");
    assert_eq!(record["director"], "Michael Mann");

    let report = dir.path().join("page.json");
    let eval = run_tablex(&[
        "evaluate",
        "--metric",
        "page-f1",
        "--pred",
        s(&out.join("records.jsonl")),
        "--gold",
        s(&dataset),
        "--dataset",
        s(&dataset),
        "--out",
        s(&report),
    ])
    .unwrap();
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    let v = json(&report);
    // title and director ground correctly; genre grounds to nothing; rating is unanswered.
    assert_eq!(v["per_attribute"]["title"]["f1"], 1.0);
    assert_eq!(v["per_attribute"]["director"]["f1"], 1.0);
    assert_eq!(v["per_attribute"]["genre"]["recall"], 0.0);
    assert_eq!(v["per_attribute"]["rating"]["precision"], 0.0);
}

#[test]
fn leaderboard_links_supplied_records() {
    let dir = tempfile::tempdir().unwrap();
    let papers = dir.path().join("papers");
    let paper = papers.join("p1");
    std::fs::create_dir_all(&paper).unwrap();
    std::fs::write(
        paper.join("table_1.tex"),
        "Model & F1 \\\\\nBase & 80.1 \\\\\nOurs & \\textbf{84.2} \\\\\n",
    )
    .unwrap();
    let result = |row: usize, value: &str| {
        format!(
            "{{\"table\": \"p1/table_1\", \"cell\": {{\"row\": {row}, \"col\": 1, \"value\": \"{value}\"}}, \"value\": \"{value}\", \"type\": \"Result\", \"task\": \"Question Answering\", \"metric\": \"F1\", \"test data/set\": \"SQuAD\", \"eval class\": \"all\"}}\n"
        )
    };
    let records = dir.path().join("records.jsonl");
    std::fs::write(
        &records,
        format!("{}{}", result(1, "80.1"), result(2, "84.2")),
    )
    .unwrap();
    let taxonomy = dir.path().join("taxonomy.json");
    std::fs::write(
        &taxonomy,
        r#"[{"task": "Question Answering", "dataset": "SQuAD", "metric": "F1", "direction": "higher_better"}]"#,
    )
    .unwrap();
    let gold = dir.path().join("gold.jsonl");
    std::fs::write(
        &gold,
        "{\"paper\": \"p1\", \"task\": \"Question Answering\", \"dataset\": \"SQuAD\", \"metric\": \"F1\", \"score\": 84.2}\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = run_tablex(&[
        "leaderboard",
        "--papers",
        s(&papers),
        "--taxonomy",
        s(&taxonomy),
        "--records",
        s(&records),
        "--gold",
        s(&gold),
        "--out",
        s(&out),
    ])
    .unwrap();
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let linked = std::fs::read_to_string(out.join("linked.jsonl")).unwrap();
    assert_eq!(linked.lines().count(), 1);
    let report = json(&out.join("report.json"));
    assert_eq!(report["micro"]["f1"], 1.0);
    assert_eq!(report["macro"]["f1"], 1.0);
}
