//! Hybrid relevance scoring: a lexical text-match signal blended with
//! per-modality semantic similarities under the index's weight scheme.
//! Retrieval finds candidates by fused-vector cosine; this module decides
//! how good each candidate actually looks for the query.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, EmbeddingError, EmbeddingVector};
use crate::fusion::{Modality, WeightScheme};
use crate::index::{IndexRecord, SearchHit};
use crate::providers::{ProviderError, TextEmbedder};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("query has no usable tokens")]
    EmptyQuery,
    #[error("record lacks a vector for weighted modality {0}")]
    MissingComponent(Modality),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Lowercase alphanumeric tokens, the shared vocabulary of every lexical
/// comparison in the engine.
pub fn normalize_text(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Blend between exact-phrase presence and token coverage. Defaults to an
/// even split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMatchWeights {
    pub phrase: f64,
    pub coverage: f64,
}

impl Default for TextMatchWeights {
    fn default() -> Self {
        TextMatchWeights {
            phrase: 0.5,
            coverage: 0.5,
        }
    }
}

impl TextMatchWeights {
    pub fn new(phrase: f64, coverage: f64) -> Result<Self, ScoreError> {
        if !phrase.is_finite() || !coverage.is_finite() || phrase < 0.0 || coverage < 0.0 {
            return Err(ScoreError::InvalidWeights(
                "text match weights must be finite and non-negative".into(),
            ));
        }
        if ((phrase + coverage) - 1.0).abs() > 1e-9 {
            return Err(ScoreError::InvalidWeights(format!(
                "text match weights sum to {}, expected 1",
                phrase + coverage
            )));
        }
        Ok(TextMatchWeights { phrase, coverage })
    }
}

fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Lexical match in [0, 1]: does the whole query phrase occur in the
/// target, and what fraction of query tokens does the target cover.
pub fn text_match_score_with(
    query: &str,
    target: &str,
    weights: TextMatchWeights,
) -> Result<f64, ScoreError> {
    let query_tokens = normalize_text(query);
    if query_tokens.is_empty() {
        return Err(ScoreError::EmptyQuery);
    }
    let target_tokens = normalize_text(target);
    let phrase = if contains_phrase(&target_tokens, &query_tokens) {
        1.0
    } else {
        0.0
    };
    let covered = query_tokens
        .iter()
        .filter(|t| target_tokens.contains(t))
        .count();
    let coverage = covered as f64 / query_tokens.len() as f64;
    Ok(weights.phrase * phrase + weights.coverage * coverage)
}

pub fn text_match_score(query: &str, target: &str) -> Result<f64, ScoreError> {
    text_match_score_with(query, target, TextMatchWeights::default())
}

/// Cosine clamped at zero. Opposed vectors mean "no evidence", not
/// "negative evidence", for relevance purposes.
pub fn semantic_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, ScoreError> {
    Ok(cosine(a, b)?.max(0.0))
}

/// The per-channel evidence behind one hybrid score. Optional fields are
/// absent when the scheme gives their modality no weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub text_match: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub image_sim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub caption_sim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ocr_sim: Option<f64>,
}

impl ComponentScores {
    fn get(&self, modality: Modality) -> Option<f64> {
        match modality {
            Modality::Text => Some(self.text_match),
            Modality::Image => self.image_sim,
            Modality::Caption => self.caption_sim,
            Modality::Ocr => self.ocr_sim,
        }
    }
}

/// A weighted combination of component scores, in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridScore {
    pub value01: f64,
    pub scheme_name: String,
    pub components: ComponentScores,
}

impl HybridScore {
    pub fn value100(&self) -> f64 {
        self.value01 * 100.0
    }

    /// Two-decimal 0..100 rendering, the format query output uses.
    pub fn display100(&self) -> String {
        format!("{:.2}", round_half_up(self.value100(), 2))
    }
}

/// Round with ties going up, the convention all displayed scores follow.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    (value * factor + 0.5).floor() / factor
}

/// Format a 0..1 score at four decimals for summary tables.
pub fn format_score01(value: f64) -> String {
    format!("{:.4}", round_half_up(value, 4))
}

/// Combine components under a scheme. Every positively weighted modality
/// must have a component; extra components are ignored.
pub fn hybrid_score(
    components: &ComponentScores,
    scheme: &WeightScheme,
) -> Result<HybridScore, ScoreError> {
    let mut value01 = 0.0;
    for m in scheme.active_modalities() {
        let c = components
            .get(m)
            .ok_or(ScoreError::MissingComponent(m))?;
        value01 += scheme.weight(m) * c;
    }
    Ok(HybridScore {
        value01,
        scheme_name: scheme.name().to_string(),
        components: *components,
    })
}

/// Score one record's channels against the query. `query_vec` is the
/// query's sentence embedding; lexical matching reads the record's stored
/// surrounding text, semantic channels read its stored vectors.
pub fn component_scores(
    query_text: &str,
    query_vec: &EmbeddingVector,
    record: &IndexRecord,
    scheme: &WeightScheme,
    weights: TextMatchWeights,
) -> Result<ComponentScores, ScoreError> {
    let text_match = text_match_score_with(query_text, &record.context_text, weights)?;
    let mut sims: [Option<f64>; 3] = [None, None, None];
    for (slot, m) in [Modality::Image, Modality::Caption, Modality::Ocr]
        .into_iter()
        .enumerate()
    {
        if scheme.weight(m) > 0.0 {
            let v = record
                .per_modality
                .get(&m)
                .ok_or(ScoreError::MissingComponent(m))?;
            sims[slot] = Some(semantic_similarity(query_vec, v)?);
        }
    }
    Ok(ComponentScores {
        text_match,
        image_sim: sims[0],
        caption_sim: sims[1],
        ocr_sim: sims[2],
    })
}

/// A search hit re-scored by the hybrid measure.
#[derive(Debug, Clone)]
pub struct RankedHit<'a> {
    pub record: &'a IndexRecord,
    pub retrieval_score: f64,
    pub hybrid: HybridScore,
}

/// Re-order hits by hybrid score, embedding the query sentence once.
/// Ties fall back to retrieval score, then record_id, so output order is
/// deterministic.
pub fn rerank<'a>(
    hits: &[SearchHit<'a>],
    query_text: &str,
    sentence: &dyn TextEmbedder,
    scheme: &WeightScheme,
    weights: TextMatchWeights,
) -> Result<Vec<RankedHit<'a>>, ScoreError> {
    if normalize_text(query_text).is_empty() {
        return Err(ScoreError::EmptyQuery);
    }
    let query_vec = sentence.embed_text(query_text)?;
    let mut ranked: Vec<RankedHit<'a>> = Vec::with_capacity(hits.len());
    for hit in hits {
        let components = component_scores(query_text, &query_vec, hit.record, scheme, weights)?;
        let hybrid = hybrid_score(&components, scheme)?;
        ranked.push(RankedHit {
            record: hit.record,
            retrieval_score: hit.score,
            hybrid,
        });
    }
    ranked.sort_by(|a, b| {
        b.hybrid
            .value01
            .partial_cmp(&a.hybrid.value01)
            .expect("scores are finite")
            .then_with(|| {
                b.retrieval_score
                    .partial_cmp(&a.retrieval_score)
                    .expect("scores are finite")
            })
            .then_with(|| a.record.record_id.cmp(&b.record.record_id))
    });
    Ok(ranked)
}
