//! Subcommand implementations. Everything here is deterministic for fixed
//! inputs under mock providers: output files carry no timestamps and
//! listings are sorted.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use visrag_core::bundle::{parse_bundle, DocumentBundle};
use visrag_core::eval::{
    improvement, read_queries_jsonl, read_runs_jsonl, render_report_csv, render_report_md,
    runs_from_scores, summarize, write_runs_jsonl, EvalRun, EvalSummary, ImprovementReport,
};
use visrag_core::eval::load_scores_csv;
use visrag_core::index::{
    build_index, deduplicate_diversify, load_index, persist_index, resolve_build_config, search,
    BuildConfig, QueryParams,
};
use visrag_core::scoring::{format_score01, normalize_text, rerank, RankedHit, TextMatchWeights};

use crate::config::{build_provider_set, resolve_scheme, text_embedder, CliConfig};
use crate::CliError;

/// Locate bundle directories: either `corpus_dir` itself is a bundle or its
/// immediate subdirectories are. Sorted so every listing is stable.
fn find_bundle_dirs(corpus_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if corpus_dir.join("manifest.json").is_file() {
        return Ok(vec![corpus_dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(corpus_dir).map_err(|e| {
        CliError::Validation(format!("cannot read {}: {e}", corpus_dir.display()))
    })?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(CliError::from)?.path();
        if path.is_dir() && path.join("manifest.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Validation(format!(
            "no bundles found under {}",
            corpus_dir.display()
        )));
    }
    Ok(dirs)
}

fn load_bundles(corpus_dir: &Path) -> Result<Vec<DocumentBundle>, CliError> {
    let dirs = find_bundle_dirs(corpus_dir)?;
    let mut bundles = Vec::new();
    let mut failures = Vec::new();
    for dir in &dirs {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        match parse_bundle(&dir.join("manifest.json")) {
            Ok(bundle) => bundles.push(bundle),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Validation(format!(
            "{} invalid bundle(s):\n  {}",
            failures.len(),
            failures.join("\n  ")
        )));
    }
    Ok(bundles)
}

#[derive(Serialize)]
struct LockDocument {
    doc_id: String,
    source_uri: String,
    images: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct LockFile {
    version: u32,
    documents: Vec<LockDocument>,
}

pub fn ingest(corpus_dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let bundles = load_bundles(corpus_dir)?;
    let mut documents: Vec<LockDocument> = bundles
        .iter()
        .map(|b| LockDocument {
            doc_id: b.doc_id.clone(),
            source_uri: b.source_uri.clone(),
            images: b
                .pages
                .iter()
                .flat_map(|p| p.images.iter())
                .map(|img| (img.image_id.clone(), img.content_hash.clone()))
                .collect(),
        })
        .collect();
    documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let image_count: usize = documents.iter().map(|d| d.images.len()).sum();
    let lock = LockFile {
        version: 1,
        documents,
    };
    let out_path = match out {
        Some(p) => p.to_path_buf(),
        None => corpus_dir.join("corpus.lock.json"),
    };
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let json = serde_json::to_string_pretty(&lock).expect("lock file serializes");
    std::fs::write(&out_path, json + "\n")?;
    println!("validated {} bundles ({image_count} images)", bundles.len());
    println!("wrote {}", out_path.display());
    Ok(())
}

pub fn index(
    config: &CliConfig,
    corpus_dir: &Path,
    scheme_name: &str,
    out: &Path,
) -> Result<(), CliError> {
    let scheme = resolve_scheme(scheme_name, config)?;
    let bundles = load_bundles(corpus_dir)?;
    let providers = build_provider_set(config, Some(corpus_dir))?;
    let build_config = BuildConfig {
        window_chars: config.window_chars,
        ..BuildConfig::default()
    };
    let index = build_index(&bundles, &providers, &scheme, &build_config)?;
    persist_index(&index, out)?;
    println!(
        "indexed {} records under scheme {} (dim {})",
        index.len(),
        scheme.name(),
        index.dim()
    );
    let provenance = index.build_config();
    let mut parts: Vec<String> = Vec::new();
    if let Some(id) = &provenance.text_embedder {
        parts.push(format!("text={id}"));
    }
    if let Some(id) = &provenance.image_embedder {
        parts.push(format!("image={id}"));
    }
    if let Some(id) = &provenance.captioner {
        parts.push(format!("caption={id}"));
    }
    if let Some(id) = &provenance.ocr_engine {
        parts.push(format!("ocr={id}"));
    }
    parts.push(format!("window={}", provenance.window_chars));
    println!("provenance: {}", parts.join(" "));
    println!("wrote {}", out.display());
    Ok(())
}

fn snippet(text: &str, max_chars: usize) -> String {
    let flat = text.replace(['\n', '\r'], " ");
    let mut out: String = flat.chars().take(max_chars).collect();
    if flat.chars().count() > max_chars {
        out.push_str("...");
    }
    out
}

fn component_summary(hit: &RankedHit) -> String {
    let c = &hit.hybrid.components;
    let mut parts = vec![format!("text_match {}", format_score01(c.text_match))];
    if let Some(v) = c.image_sim {
        parts.push(format!("image_sim {}", format_score01(v)));
    }
    if let Some(v) = c.caption_sim {
        parts.push(format!("caption_sim {}", format_score01(v)));
    }
    if let Some(v) = c.ocr_sim {
        parts.push(format!("ocr_sim {}", format_score01(v)));
    }
    parts.join(", ")
}

#[derive(Serialize)]
struct JsonHit<'a> {
    rank: usize,
    record_id: &'a str,
    doc_id: &'a str,
    image_id: &'a str,
    score01: f64,
    score100: String,
    retrieval_score: f64,
    components: &'a visrag_core::scoring::ComponentScores,
    caption: Option<&'a str>,
    ocr_text: Option<&'a str>,
}

pub fn query(
    config: &CliConfig,
    index_path: &Path,
    question: &str,
    k_flag: Option<usize>,
    json: bool,
) -> Result<(), CliError> {
    if normalize_text(question).is_empty() {
        return Err(CliError::Validation(
            "question contains no usable tokens".into(),
        ));
    }
    let index = load_index(index_path)?;
    let text = text_embedder(config, "text_embed", "mock-text-v1")?;
    let sentence = text_embedder(config, "sentence_sim", "mock-sentence-v1")?;
    let k = k_flag.unwrap_or(config.k);
    let query_vec = text.embed_text(question).map_err(CliError::from)?;
    let hits = search(&index, &query_vec, k)?;
    let params = QueryParams {
        k,
        sim_threshold: config.sim_threshold,
        max_per_doc: config.max_per_doc,
    };
    let kept = deduplicate_diversify(&hits, &params);
    let ranked = rerank(
        &kept,
        question,
        sentence.as_ref(),
        index.scheme(),
        TextMatchWeights::default(),
    )?;
    if ranked.is_empty() {
        println!("no results");
        return Ok(());
    }
    if json {
        let payload: Vec<JsonHit> = ranked
            .iter()
            .enumerate()
            .map(|(i, hit)| JsonHit {
                rank: i + 1,
                record_id: &hit.record.record_id,
                doc_id: &hit.record.doc_id,
                image_id: &hit.record.image_id,
                score01: hit.hybrid.value01,
                score100: hit.hybrid.display100(),
                retrieval_score: hit.retrieval_score,
                components: &hit.hybrid.components,
                caption: hit.record.caption.as_deref(),
                ocr_text: hit.record.ocr_text.as_deref(),
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&payload).expect("hits serialize")
        );
        return Ok(());
    }
    for (i, hit) in ranked.iter().enumerate() {
        println!(
            "{}. {}  score {}  [{}]",
            i + 1,
            hit.record.record_id,
            hit.hybrid.display100(),
            component_summary(hit)
        );
        if let Some(caption) = &hit.record.caption {
            println!("   caption: {}", snippet(caption, 96));
        }
        if let Some(ocr_text) = &hit.record.ocr_text {
            println!("   ocr: {}", snippet(ocr_text, 96));
        }
    }
    Ok(())
}

/// Pick the comparison baseline: `text_only` when present, otherwise the
/// first method.
fn baseline_method(methods: &[String]) -> &str {
    methods
        .iter()
        .find(|m| m.as_str() == "text_only")
        .unwrap_or(&methods[0])
}

fn summarize_runs(
    runs: &[EvalRun],
) -> Result<(Vec<EvalSummary>, Vec<ImprovementReport>), CliError> {
    let summaries: Vec<EvalSummary> = runs
        .iter()
        .map(summarize)
        .collect::<Result<_, _>>()
        .map_err(CliError::from)?;
    let methods: Vec<String> = summaries.iter().map(|s| s.method.clone()).collect();
    let baseline_name = baseline_method(&methods).to_string();
    let baseline = summaries
        .iter()
        .find(|s| s.method == baseline_name)
        .expect("baseline comes from the summary set");
    let improvements: Vec<ImprovementReport> = summaries
        .iter()
        .filter(|s| s.method != baseline_name)
        .map(|variant| improvement(baseline, variant))
        .collect::<Result<_, _>>()
        .map_err(CliError::from)?;
    Ok((summaries, improvements))
}

fn write_report_files(
    out_dir: &Path,
    runs: &[EvalRun],
    summaries: &[EvalSummary],
    improvements: &[ImprovementReport],
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    write_runs_jsonl(runs, &out_dir.join("runs.jsonl"))?;
    let summary_json =
        serde_json::to_string_pretty(summaries).expect("summaries serialize") + "\n";
    std::fs::write(out_dir.join("summary.json"), summary_json)?;
    std::fs::write(
        out_dir.join("report.md"),
        render_report_md(summaries, improvements),
    )?;
    std::fs::write(out_dir.join("report.csv"), render_report_csv(summaries))?;
    Ok(())
}

pub fn eval(
    config: &CliConfig,
    corpus_dir: &Path,
    queries_path: Option<&Path>,
    methods_flag: &[String],
    out_dir: &Path,
    from_scores: Option<&Path>,
) -> Result<(), CliError> {
    let runs: Vec<EvalRun> = if let Some(csv_path) = from_scores {
        let content = std::fs::read_to_string(csv_path).map_err(|e| {
            CliError::Validation(format!("cannot read {}: {e}", csv_path.display()))
        })?;
        let table = load_scores_csv(&content).map_err(CliError::from)?;
        runs_from_scores(&table)
    } else {
        let queries_path = queries_path.ok_or_else(|| {
            CliError::Validation("--queries is required unless --from-scores is given".into())
        })?;
        if !queries_path.is_file() {
            return Err(CliError::Validation(format!(
                "queries file not found: {}",
                queries_path.display()
            )));
        }
        let queries = read_queries_jsonl(queries_path).map_err(CliError::from)?;
        let methods = if methods_flag.is_empty() {
            config.schemes.clone()
        } else {
            methods_flag.to_vec()
        };
        if methods.is_empty() {
            return Err(CliError::Validation("no methods to evaluate".into()));
        }
        let bundles = load_bundles(corpus_dir)?;
        let providers = build_provider_set(config, Some(corpus_dir))?;
        let cache_dir = out_dir.join("indexes");
        std::fs::create_dir_all(&cache_dir)?;
        let mut method_indexes = Vec::new();
        for name in &methods {
            let scheme = resolve_scheme(name, config)?;
            let cache_path = cache_dir.join(format!("{name}.jsonl"));
            let expected = resolve_build_config(&providers, &scheme, config.window_chars);
            let index = match load_index(&cache_path) {
                Ok(cached)
                    if cached.scheme() == &scheme && cached.build_config() == &expected =>
                {
                    println!("{name}: reusing cached index ({} records)", cached.len());
                    cached
                }
                _ => {
                    let build_config = BuildConfig {
                        window_chars: config.window_chars,
                        ..BuildConfig::default()
                    };
                    let built = build_index(&bundles, &providers, &scheme, &build_config)?;
                    persist_index(&built, &cache_path)?;
                    println!("{name}: built index ({} records)", built.len());
                    built
                }
            };
            method_indexes.push((name.clone(), index));
        }
        let params = QueryParams {
            k: config.k,
            sim_threshold: config.sim_threshold,
            max_per_doc: config.max_per_doc,
        };
        visrag_core::eval::run_eval(
            &queries,
            &method_indexes,
            &providers,
            &params,
            TextMatchWeights::default(),
        )
        .map_err(CliError::from)?
    };
    if runs.is_empty() {
        return Err(CliError::Validation("evaluation produced no runs".into()));
    }
    let (summaries, improvements) = summarize_runs(&runs)?;
    write_report_files(out_dir, &runs, &summaries, &improvements)?;
    for s in &summaries {
        println!(
            "{}: avg {} median {} std {}",
            s.method,
            format_score01(s.avg),
            format_score01(s.median),
            format_score01(s.std)
        );
    }
    for imp in &improvements {
        println!(
            "{} vs {}: {:+.1}%",
            imp.variant_method, imp.baseline_method, imp.improvement_pct
        );
    }
    println!("wrote runs and reports under {}", out_dir.display());
    Ok(())
}

pub fn report(run_dir: &Path, format: &str) -> Result<(), CliError> {
    let runs = read_runs_jsonl(&run_dir.join("runs.jsonl")).map_err(CliError::from)?;
    if runs.is_empty() {
        return Err(CliError::Validation(format!(
            "no runs found under {}",
            run_dir.display()
        )));
    }
    let (summaries, improvements) = summarize_runs(&runs)?;
    let (file_name, rendered) = match format {
        "md" => ("report.md", render_report_md(&summaries, &improvements)),
        "csv" => ("report.csv", render_report_csv(&summaries)),
        other => {
            return Err(CliError::Validation(format!(
                "unknown format '{other}' (expected md or csv)"
            )))
        }
    };
    std::fs::write(run_dir.join(file_name), &rendered)?;
    print!("{rendered}");
    Ok(())
}
