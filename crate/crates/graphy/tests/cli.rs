mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn graphy(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphy"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `name: N` lines of the scrape summary.
fn count(summary: &str, name: &str) -> usize {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{name}: ")))
        .and_then(|v| v.split_whitespace().next())
        .unwrap_or_else(|| panic!("no {name:?} in {summary}"))
        .parse()
        .unwrap()
}

/// Dimensions a repository document contributes, counted from the fixture
/// files: scripted rows plus numbered reference lines.
fn fixture_dimensions(id: &str) -> usize {
    let f = common::fixtures();
    let responses: Value = serde_json::from_str(&std::fs::read_to_string(f.join("responses.json")).unwrap()).unwrap();
    let scripted: usize = responses["responses"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["doc_id"] == id)
        .map(|r| r["output"].as_array().unwrap().len())
        .sum();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(f.join(format!("repo/{id}.json"))).unwrap()).unwrap();
    let refs = doc["body"]
        .as_str()
        .unwrap()
        .split("\nReferences\n")
        .nth(1)
        .map_or(0, |t| t.lines().filter(|l| l.starts_with('[')).count());
    scripted + refs
}

#[test]
fn scrape_fixture_title_reports_expansion_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    let out = graphy(&config, &["scrape", "The Llama 3 Herd of Models"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert_eq!(count(&s, "seeds"), 1);
    assert_eq!(count(&s, "facts"), 10);
    assert_eq!(count(&s, "edges"), 10);
    assert_eq!(count(&s, "dropped refs"), 1);
    assert_eq!(count(&s, "budget skipped"), 1);
    let expected: usize = (2..=11).map(|i| fixture_dimensions(&format!("r{i:02}"))).sum();
    assert_eq!(count(&s, "dimensions"), expected);
}

#[test]
fn scrape_accepts_document_paths() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    let doc = common::fixtures().join("corpus/c1.txt");
    let out = graphy(&config, &["scrape", "--depth", "0", doc.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(count(&stdout(&out), "seeds"), 1);
    assert_eq!(count(&stdout(&out), "facts"), 0);
}

#[test]
fn empty_seed_list_prints_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    let out = graphy(&config, &["scrape"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let s = stdout(&out);
    for name in ["seeds", "facts", "dimensions", "edges", "dropped refs"] {
        assert_eq!(count(&s, name), 0, "{name}");
    }
}

#[test]
fn missing_workflow_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    let mut cfg: Value = serde_json::from_slice(&std::fs::read(&config).unwrap()).unwrap();
    let missing = dir.path().join("no-such-workflow.json");
    cfg["workflow"] = Value::String(missing.display().to_string());
    std::fs::write(&config, cfg.to_string()).unwrap();
    let out = graphy(&config, &["scrape"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(&missing.display().to_string()), "{}", stderr(&out));
}

#[test]
fn missing_config_exits_2() {
    let out = graphy(Path::new("/nonexistent/graphy.json"), &["scrape"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/graphy.json"));
}

#[test]
fn unknown_export_format_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    let out = graphy(&config, &["export", "--format", "graphml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("graphml"));
}

#[test]
fn export_lists_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    common::scrape_fixture(&config);
    for format in ["jsonl", "csv"] {
        let out_dir = dir.path().join(format);
        let out = graphy(&config, &["export", "--format", format, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        let files: Vec<String> = stdout(&out).lines().map(str::to_owned).collect();
        assert!(!files.is_empty());
        for f in files {
            assert!(Path::new(&f).starts_with(&out_dir), "{f}");
            assert!(std::fs::metadata(&f).unwrap().len() > 0, "{f}");
        }
    }
}

#[test]
fn report_command_writes_latex() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    common::scrape_fixture(&config);
    let tex = dir.path().join("report.tex");
    let out = graphy(
        &config,
        &[
            "report",
            "--select",
            "Attention Is All You Need",
            "--select",
            "Language Models are Few-Shot Learners",
            "--instruction",
            "Please write me a related work, focusing on their challenge",
            "--out",
            tex.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&tex).unwrap();
    assert_eq!(text.matches("\\bibitem{").count(), 2);
}
