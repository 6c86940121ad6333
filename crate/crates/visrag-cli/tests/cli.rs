//! End-to-end tests for the `visrag` binary: exit codes, output shapes,
//! and determinism of reruns. Each test builds its own corpus under a
//! tempdir so they can run in parallel.

use std::path::{Path, PathBuf};
use std::process::Command;

use visrag_core::eval::write_queries_jsonl;
use visrag_core::fixture;
use visrag_core::fusion::WeightScheme;
use visrag_core::index::{persist_index, BuildConfig, VectorIndex};

struct CmdResult {
    code: i32,
    stdout: String,
    stderr: String,
}

fn visrag(args: &[&str]) -> CmdResult {
    visrag_env(args, &[])
}

fn visrag_env(args: &[&str], envs: &[(&str, &str)]) -> CmdResult {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_visrag"));
    cmd.args(args);
    cmd.env_remove("VISRAG_CONFIG");
    for (key, value) in envs {
        cmd.env(key, value);
    }
    let output = cmd.output().expect("binary runs");
    CmdResult {
        code: output.status.code().expect("binary exits normally"),
        stdout: String::from_utf8(output.stdout).expect("stdout is utf-8"),
        stderr: String::from_utf8(output.stderr).expect("stderr is utf-8"),
    }
}

/// Write the fixture corpus plus queries.jsonl, returning (corpus, queries).
fn corpus_with_queries(root: &Path) -> (PathBuf, PathBuf) {
    let corpus = root.join("corpus");
    fixture::write_corpus(&corpus).expect("fixture corpus writes");
    let queries = root.join("queries.jsonl");
    write_queries_jsonl(&fixture::queries(), &queries).expect("queries write");
    (corpus, queries)
}

#[test]
fn ingest_validates_and_writes_a_lock_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let res = visrag(&["ingest", corpus.to_str().unwrap()]);
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
    assert!(res.stdout.contains("validated 20 bundles (70 images)"));
    let lock: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(corpus.join("corpus.lock.json")).unwrap())
            .unwrap();
    assert_eq!(lock["version"], 1);
    assert_eq!(lock["documents"].as_array().unwrap().len(), 20);
    let d01 = &lock["documents"][0];
    assert_eq!(d01["doc_id"], "d01");
    assert!(d01["images"]["d01-img1"].as_str().unwrap().len() == 64);
}

#[test]
fn ingest_names_the_corrupted_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    std::fs::write(corpus.join("d03/payloads/d03-img1.bin"), b"tampered").unwrap();
    let res = visrag(&["ingest", corpus.to_str().unwrap()]);
    assert_eq!(res.code, 2);
    assert!(res.stderr.contains("d03"), "stderr: {}", res.stderr);
    assert!(res.stderr.contains("hash mismatch"), "stderr: {}", res.stderr);
    assert!(!corpus.join("corpus.lock.json").exists());
}

#[test]
fn ingest_rejects_an_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let res = visrag(&["ingest", tmp.path().to_str().unwrap()]);
    assert_eq!(res.code, 2);
    assert!(res.stderr.contains("no bundles found"), "stderr: {}", res.stderr);
}

#[test]
fn index_reports_count_scheme_and_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let out = tmp.path().join("full.jsonl");
    let res = visrag(&[
        "index",
        corpus.to_str().unwrap(),
        "--scheme",
        "full",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
    assert!(res.stdout.contains("indexed 70 records under scheme full"));
    assert!(res.stdout.contains("text=mock-text-v1"));
    assert!(res.stdout.contains("ocr=mock-ocr-v1"));
    assert!(out.is_file());
}

#[test]
fn index_rejects_an_unknown_scheme() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let out = tmp.path().join("x.jsonl");
    let res = visrag(&[
        "index",
        corpus.to_str().unwrap(),
        "--scheme",
        "bogus",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.code, 2);
    assert!(res.stderr.contains("bogus"));
    assert!(res.stderr.contains("text_only"), "stderr: {}", res.stderr);
    assert!(!out.exists(), "failed index run must not leave a file behind");
}

fn build_full_index(corpus: &Path, out: &Path) {
    let res = visrag(&[
        "index",
        corpus.to_str().unwrap(),
        "--scheme",
        "full",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
}

#[test]
fn query_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let index = tmp.path().join("full.jsonl");
    build_full_index(&corpus, &index);
    let args = [
        "query",
        index.to_str().unwrap(),
        fixture::ECHECKIN_QUESTION,
        "-k",
        "5",
    ];
    let first = visrag(&args);
    let second = visrag(&args);
    assert_eq!(first.code, 0, "stderr: {}", first.stderr);
    assert_eq!(first.stdout, second.stdout);
    assert!(first.stdout.starts_with("1. "));
    assert!(first.stdout.contains("text_match"));
}

#[test]
fn query_json_is_parseable_and_ranked() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let index = tmp.path().join("full.jsonl");
    build_full_index(&corpus, &index);
    let res = visrag(&[
        "query",
        index.to_str().unwrap(),
        "How do I reset my password?",
        "--json",
    ]);
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
    let hits: serde_json::Value = serde_json::from_str(&res.stdout).unwrap();
    let hits = hits.as_array().unwrap();
    assert!(!hits.is_empty());
    assert_eq!(hits[0]["rank"], 1);
    assert!(hits[0]["record_id"].as_str().unwrap().contains('/'));
    assert!(hits[0]["components"]["text_match"].is_number());
    assert!(hits[0]["score100"].as_str().unwrap().contains('.'));
}

#[test]
fn query_with_no_usable_tokens_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let index = tmp.path().join("full.jsonl");
    build_full_index(&corpus, &index);
    let res = visrag(&["query", index.to_str().unwrap(), "???!!!"]);
    assert_eq!(res.code, 2);
    assert!(res.stderr.contains("no usable tokens"));
}

#[test]
fn query_against_an_empty_index_prints_no_results() {
    let tmp = tempfile::tempdir().unwrap();
    let index_path = tmp.path().join("empty.jsonl");
    let empty = VectorIndex::empty(
        512,
        WeightScheme::by_name("text_only").unwrap(),
        BuildConfig::default(),
    );
    persist_index(&empty, &index_path).unwrap();
    let res = visrag(&["query", index_path.to_str().unwrap(), "anything at all"]);
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
    assert_eq!(res.stdout.trim(), "no results");
}

#[test]
fn query_with_mismatched_embedder_dim_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let index = tmp.path().join("full.jsonl");
    build_full_index(&corpus, &index);
    let config_path = tmp.path().join("narrow.json");
    std::fs::write(
        &config_path,
        r#"{"providers": {"text_embed": {"kind": "mock", "model_id": "mock-text-v1", "dim": 128}}}"#,
    )
    .unwrap();
    let res = visrag(&[
        "--config",
        config_path.to_str().unwrap(),
        "query",
        index.to_str().unwrap(),
        "How do I reset my password?",
    ]);
    assert_eq!(res.code, 4, "stderr: {}", res.stderr);
    assert!(res.stderr.contains("dim"), "stderr: {}", res.stderr);
}

#[test]
fn config_is_picked_up_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let index = tmp.path().join("full.jsonl");
    build_full_index(&corpus, &index);
    let config_path = tmp.path().join("narrow.json");
    std::fs::write(
        &config_path,
        r#"{"providers": {"text_embed": {"kind": "mock", "model_id": "mock-text-v1", "dim": 128}}}"#,
    )
    .unwrap();
    let res = visrag_env(
        &["query", index.to_str().unwrap(), "How do I reset my password?"],
        &[("VISRAG_CONFIG", config_path.to_str().unwrap())],
    );
    assert_eq!(res.code, 4, "env config should shrink the embedder dim");
}

#[test]
fn tampered_index_checksum_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let index = tmp.path().join("full.jsonl");
    build_full_index(&corpus, &index);
    let content = std::fs::read_to_string(&index).unwrap();
    let tampered = content.replacen("\"context_text\":\"", "\"context_text\":\"x", 1);
    assert_ne!(content, tampered, "tamper target must exist");
    std::fs::write(&index, tampered).unwrap();
    let res = visrag(&["query", index.to_str().unwrap(), "anything"]);
    assert_eq!(res.code, 4, "stderr: {}", res.stderr);
    assert!(res.stderr.contains("checksum"), "stderr: {}", res.stderr);
}

#[test]
fn unknown_index_version_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let index = tmp.path().join("full.jsonl");
    build_full_index(&corpus, &index);
    let content = std::fs::read_to_string(&index).unwrap();
    let bumped = content.replacen("\"version\":1", "\"version\":2", 1);
    assert_ne!(content, bumped, "version field must exist in the header");
    std::fs::write(&index, bumped).unwrap();
    let res = visrag(&["query", index.to_str().unwrap(), "anything"]);
    assert_eq!(res.code, 4, "stderr: {}", res.stderr);
}

#[test]
fn index_provider_failure_exits_3_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let config_path = tmp.path().join("dead-endpoint.json");
    std::fs::write(
        &config_path,
        r#"{"providers": {"image_embed": {"kind": "http", "endpoint": "http://127.0.0.1:9", "model_id": "img-v1", "dim": 512, "timeout_ms": 300}}}"#,
    )
    .unwrap();
    let out = tmp.path().join("full.jsonl");
    let res = visrag(&[
        "--config",
        config_path.to_str().unwrap(),
        "index",
        corpus.to_str().unwrap(),
        "--scheme",
        "full",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.code, 3, "stderr: {}", res.stderr);
    assert!(!out.exists(), "failed build must not leave a partial index");
}

#[test]
fn eval_requires_an_existing_queries_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = corpus_with_queries(tmp.path());
    let res = visrag(&[
        "eval",
        corpus.to_str().unwrap(),
        "--queries",
        tmp.path().join("missing.jsonl").to_str().unwrap(),
        "--methods",
        "text_only",
        "-o",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(res.code, 2);
    assert!(res.stderr.contains("queries file not found"));
}

#[test]
fn eval_reuses_the_cached_index_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, queries) = corpus_with_queries(tmp.path());
    let out = tmp.path().join("run");
    let args = [
        "eval",
        corpus.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--methods",
        "text_only,full",
        "-o",
        out.to_str().unwrap(),
    ];
    let first = visrag(&args);
    assert_eq!(first.code, 0, "stderr: {}", first.stderr);
    assert!(first.stdout.contains("built index"));
    assert!(!first.stdout.contains("reusing cached index"));
    let second = visrag(&args);
    assert_eq!(second.code, 0, "stderr: {}", second.stderr);
    assert!(
        second.stdout.contains("text_only: reusing cached index (70 records)"),
        "stdout: {}",
        second.stdout
    );
    assert!(second.stdout.contains("full: reusing cached index (70 records)"));
}

#[test]
fn eval_rebuilds_when_the_build_config_changes() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, queries) = corpus_with_queries(tmp.path());
    let out = tmp.path().join("run");
    let base = [
        "eval",
        corpus.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--methods",
        "text_only",
        "-o",
        out.to_str().unwrap(),
    ];
    let first = visrag(&base);
    assert_eq!(first.code, 0, "stderr: {}", first.stderr);
    let config_path = tmp.path().join("wide-window.json");
    std::fs::write(&config_path, r#"{"window_chars": 1024}"#).unwrap();
    let mut with_config = vec!["--config", config_path.to_str().unwrap()];
    with_config.extend_from_slice(&base);
    let second = visrag(&with_config);
    assert_eq!(second.code, 0, "stderr: {}", second.stderr);
    assert!(
        second.stdout.contains("text_only: built index"),
        "a window change must invalidate the cache, stdout: {}",
        second.stdout
    );
}

#[test]
fn eval_from_scores_reproduces_the_published_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let csv_path = tmp.path().join("scores.csv");
    std::fs::write(&csv_path, fixture::reference_scores_csv()).unwrap();
    let out = tmp.path().join("run");
    let res = visrag(&[
        "eval",
        tmp.path().to_str().unwrap(),
        "--from-scores",
        csv_path.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
    assert!(res.stdout.contains("text_only: avg 0.2387"));
    assert!(res.stdout.contains("text_image vs text_only: +5.2%"));
    assert!(res.stdout.contains("caption_sonnet vs text_only: +49.6%"));
    assert!(res.stdout.contains("ocr_sonnet vs text_only: +57.3%"));
    for name in ["runs.jsonl", "summary.json", "report.md", "report.csv"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn report_rerenders_md_and_csv_from_saved_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let csv_path = tmp.path().join("scores.csv");
    std::fs::write(&csv_path, fixture::reference_scores_csv()).unwrap();
    let out = tmp.path().join("run");
    let eval = visrag(&[
        "eval",
        tmp.path().to_str().unwrap(),
        "--from-scores",
        csv_path.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(eval.code, 0, "stderr: {}", eval.stderr);
    let md_before = std::fs::read_to_string(out.join("report.md")).unwrap();
    let md = visrag(&["report", out.to_str().unwrap(), "--format", "md"]);
    assert_eq!(md.code, 0, "stderr: {}", md.stderr);
    assert_eq!(md.stdout, md_before, "re-render must match the eval output");
    let csv = visrag(&["report", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(csv.code, 0);
    assert!(csv.stdout.starts_with("method,avg,median,std\n"));
    assert!(csv.stdout.contains("ocr_sonnet,"));
    let bad = visrag(&["report", out.to_str().unwrap(), "--format", "pdf"]);
    assert_eq!(bad.code, 2);
    assert!(bad.stderr.contains("unknown format"));
}
