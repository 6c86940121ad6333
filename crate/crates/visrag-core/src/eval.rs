//! Evaluation harness: run a query set against one index per method,
//! summarize the per-query hybrid scores, and render deterministic
//! reports. Reports carry no timestamps or environment detail, so equal
//! inputs produce byte-equal output.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{deduplicate_diversify, search, IndexError, QueryParams, VectorIndex};
use crate::providers::ProviderSet;
use crate::scoring::{format_score01, rerank, ComponentScores, ScoreError, TextMatchWeights};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation of {0:?} produced no rows")]
    EmptyRun(String),
    #[error("methods {a:?} and {b:?} index different corpora")]
    CorpusMismatch { a: String, b: String },
    #[error("baseline average is not positive, improvement is undefined")]
    ZeroBaseline,
    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Provider(#[from] crate::providers::ProviderError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub qid: String,
    pub question: String,
}

/// One query's outcome under one method: the top hit's hybrid score, or
/// zero with no components when nothing survived retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub qid: String,
    pub score01: f64,
    pub components: Option<ComponentScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub method: String,
    pub rows: Vec<EvalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: String,
    pub avg: f64,
    pub median: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub baseline_method: String,
    pub variant_method: String,
    pub baseline_avg: f64,
    pub variant_avg: f64,
    pub improvement_pct: f64,
}

fn record_ids(index: &VectorIndex) -> BTreeSet<&str> {
    index.records().iter().map(|r| r.record_id.as_str()).collect()
}

/// Score every query against every method's index. Methods run in the
/// order given; all indexes must cover the same record set, otherwise the
/// comparison would measure corpus drift instead of method quality.
pub fn run_eval(
    queries: &[EvalQuery],
    methods: &[(String, VectorIndex)],
    providers: &ProviderSet,
    params: &QueryParams,
    weights: TextMatchWeights,
) -> Result<Vec<EvalRun>, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyRun("queries".into()));
    }
    if methods.is_empty() {
        return Err(EvalError::EmptyRun("methods".into()));
    }
    let reference = record_ids(&methods[0].1);
    for (name, index) in &methods[1..] {
        if record_ids(index) != reference {
            return Err(EvalError::CorpusMismatch {
                a: methods[0].0.clone(),
                b: name.clone(),
            });
        }
    }
    let mut runs = Vec::with_capacity(methods.len());
    for (method, index) in methods {
        let mut rows = Vec::with_capacity(queries.len());
        for query in queries {
            let query_vec = providers.text.embed_text(&query.question)?;
            let hits = search(index, &query_vec, params.k)?;
            let kept = deduplicate_diversify(&hits, params);
            let ranked = rerank(
                &kept,
                &query.question,
                providers.sentence.as_ref(),
                index.scheme(),
                weights,
            )?;
            let row = match ranked.first() {
                Some(top) => EvalRow {
                    qid: query.qid.clone(),
                    score01: top.hybrid.value01,
                    components: Some(top.hybrid.components),
                },
                None => EvalRow {
                    qid: query.qid.clone(),
                    score01: 0.0,
                    components: None,
                },
            };
            rows.push(row);
        }
        runs.push(EvalRun {
            method: method.clone(),
            rows,
        });
    }
    Ok(runs)
}

/// Mean, median, and sample standard deviation of a run's scores.
/// Sample (n - 1) variance is the convention throughout: these are
/// nineteen-ish query draws, not a population. A single row has no
/// spread, so its std is zero.
pub fn summarize(run: &EvalRun) -> Result<EvalSummary, EvalError> {
    if run.rows.is_empty() {
        return Err(EvalError::EmptyRun(run.method.clone()));
    }
    let n = run.rows.len();
    let avg = run.rows.iter().map(|r| r.score01).sum::<f64>() / n as f64;
    let mut sorted: Vec<f64> = run.rows.iter().map(|r| r.score01).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let std = if n == 1 {
        0.0
    } else {
        let ss: f64 = sorted.iter().map(|s| (s - avg) * (s - avg)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(EvalSummary {
        method: run.method.clone(),
        avg,
        median,
        std,
    })
}

/// Relative change of the variant's average over the baseline's.
pub fn improvement(
    baseline: &EvalSummary,
    variant: &EvalSummary,
) -> Result<ImprovementReport, EvalError> {
    if baseline.avg <= 0.0 {
        return Err(EvalError::ZeroBaseline);
    }
    Ok(ImprovementReport {
        baseline_method: baseline.method.clone(),
        variant_method: variant.method.clone(),
        baseline_avg: baseline.avg,
        variant_avg: variant.avg,
        improvement_pct: 100.0 * (variant.avg - baseline.avg) / baseline.avg,
    })
}

/// Markdown report: a summary table at four decimals plus relative
/// improvements against the baseline.
pub fn render_report_md(
    summaries: &[EvalSummary],
    improvements: &[ImprovementReport],
) -> String {
    let mut out = String::from("# Retrieval evaluation\n\n");
    out.push_str("| method | avg | median | std |\n");
    out.push_str("|---|---|---|---|\n");
    for s in summaries {
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            s.method,
            format_score01(s.avg),
            format_score01(s.median),
            format_score01(s.std)
        ));
    }
    if let Some(first) = improvements.first() {
        out.push_str(&format!("\n## Improvements vs {}\n\n", first.baseline_method));
        for imp in improvements {
            out.push_str(&format!(
                "- {} vs {}: {:+.1}%\n",
                imp.variant_method, imp.baseline_method, imp.improvement_pct
            ));
        }
    }
    out.push_str("\nScores are hybrid relevance values in [0, 1]; no further normalization is applied.\n");
    out
}

/// CSV summary at full precision, so parsing it back loses nothing.
pub fn render_report_csv(summaries: &[EvalSummary]) -> String {
    let mut out = String::from("method,avg,median,std\n");
    for s in summaries {
        out.push_str(&format!("{},{},{},{}\n", s.method, s.avg, s.median, s.std));
    }
    out
}

pub fn parse_summary_csv(content: &str) -> Result<Vec<EvalSummary>, EvalError> {
    let mut reader = csv::Reader::from_reader(content.as_bytes());
    let mut out = Vec::new();
    for record in reader.deserialize::<EvalSummary>() {
        out.push(record.map_err(|e| EvalError::Malformed {
            what: "summary csv".into(),
            detail: e.to_string(),
        })?);
    }
    Ok(out)
}

/// One line of `runs.jsonl`. `components` serializes as `{}` when the
/// query retrieved nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLine {
    pub qid: String,
    pub method: String,
    pub score01: f64,
    #[serde(with = "components_field")]
    pub components: Option<ComponentScores>,
}

mod components_field {
    use serde::de::Error as _;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scoring::ComponentScores;

    pub fn serialize<S: Serializer>(
        value: &Option<ComponentScores>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        match value {
            Some(c) => c.serialize(serializer),
            None => serializer.serialize_map(Some(0))?.end(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Option<ComponentScores>, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        match &value {
            serde_json::Value::Object(map) if map.is_empty() => Ok(None),
            _ => serde_json::from_value(value).map(Some).map_err(D::Error::custom),
        }
    }
}

pub fn runs_to_lines(runs: &[EvalRun]) -> Vec<RunLine> {
    runs.iter()
        .flat_map(|run| {
            run.rows.iter().map(|row| RunLine {
                qid: row.qid.clone(),
                method: run.method.clone(),
                score01: row.score01,
                components: row.components,
            })
        })
        .collect()
}

/// Group run lines back into runs, preserving first-seen method order.
pub fn lines_to_runs(lines: &[RunLine]) -> Vec<EvalRun> {
    let mut runs: Vec<EvalRun> = Vec::new();
    for line in lines {
        let run = match runs.iter_mut().find(|r| r.method == line.method) {
            Some(run) => run,
            None => {
                runs.push(EvalRun {
                    method: line.method.clone(),
                    rows: Vec::new(),
                });
                runs.last_mut().unwrap()
            }
        };
        run.rows.push(EvalRow {
            qid: line.qid.clone(),
            score01: line.score01,
            components: line.components,
        });
    }
    runs
}

pub fn write_runs_jsonl(runs: &[EvalRun], path: &Path) -> Result<(), EvalError> {
    let mut body = String::new();
    for line in runs_to_lines(runs) {
        body.push_str(&serde_json::to_string(&line).expect("run line serializes"));
        body.push('\n');
    }
    std::fs::write(path, body)?;
    Ok(())
}

pub fn read_runs_jsonl(path: &Path) -> Result<Vec<EvalRun>, EvalError> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RunLine = serde_json::from_str(line).map_err(|e| EvalError::Malformed {
            what: "runs jsonl".into(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        lines.push(parsed);
    }
    Ok(lines_to_runs(&lines))
}

pub fn write_queries_jsonl(queries: &[EvalQuery], path: &Path) -> Result<(), EvalError> {
    let mut body = String::new();
    for q in queries {
        body.push_str(&serde_json::to_string(q).expect("query serializes"));
        body.push('\n');
    }
    std::fs::write(path, body)?;
    Ok(())
}

pub fn read_queries_jsonl(path: &Path) -> Result<Vec<EvalQuery>, EvalError> {
    let content = std::fs::read_to_string(path)?;
    let mut queries = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: EvalQuery = serde_json::from_str(line).map_err(|e| EvalError::Malformed {
            what: "queries jsonl".into(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        queries.push(q);
    }
    Ok(queries)
}

/// A per-query score table: one row per qid, one column per method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoresTable {
    pub methods: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Parse a `qid,method1,method2,...` CSV of raw scores.
pub fn load_scores_csv(content: &str) -> Result<ScoresTable, EvalError> {
    let mut reader = csv::Reader::from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| EvalError::Malformed {
            what: "scores csv".into(),
            detail: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || headers.get(0) != Some("qid") {
        return Err(EvalError::Malformed {
            what: "scores csv".into(),
            detail: "first column must be qid".into(),
        });
    }
    let methods: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if methods.is_empty() {
        return Err(EvalError::Malformed {
            what: "scores csv".into(),
            detail: "no method columns".into(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| EvalError::Malformed {
            what: "scores csv".into(),
            detail: e.to_string(),
        })?;
        if record.len() != methods.len() + 1 {
            return Err(EvalError::Malformed {
                what: "scores csv".into(),
                detail: format!(
                    "row {:?} has {} fields, expected {}",
                    record.get(0).unwrap_or(""),
                    record.len(),
                    methods.len() + 1
                ),
            });
        }
        let qid = record.get(0).unwrap().to_string();
        let mut scores = Vec::with_capacity(methods.len());
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| EvalError::Malformed {
                what: "scores csv".into(),
                detail: format!("{qid}: {field:?} is not a number"),
            })?;
            scores.push(v);
        }
        rows.push((qid, scores));
    }
    Ok(ScoresTable { methods, rows })
}

/// Expand a scores table into runs, components unknown.
pub fn runs_from_scores(table: &ScoresTable) -> Vec<EvalRun> {
    table
        .methods
        .iter()
        .enumerate()
        .map(|(col, method)| EvalRun {
            method: method.clone(),
            rows: table
                .rows
                .iter()
                .map(|(qid, scores)| EvalRow {
                    qid: qid.clone(),
                    score01: scores[col],
                    components: None,
                })
                .collect(),
        })
        .collect()
}
