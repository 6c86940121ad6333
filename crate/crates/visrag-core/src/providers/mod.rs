//! Provider traits for the four model roles: text embedding, image
//! embedding, captioning, and OCR. The engine only ever talks to these
//! traits; `mock` gives deterministic offline implementations and `http`
//! adapts a remote inference endpoint.

pub mod http;
pub mod mock;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingVector;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider returned dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty image payload")]
    EmptyPayload,
}

pub trait TextEmbedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Embed a piece of text. Text with no usable content embeds to the
    /// zero vector rather than erroring, so absent modalities stay cheap.
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}

pub trait ImageEmbedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_image(&self, image_bytes: &[u8]) -> Result<EmbeddingVector, ProviderError>;
}

pub trait Captioner: Send + Sync {
    fn id(&self) -> &str;
    fn generate_caption(
        &self,
        image_id: &str,
        image_bytes: &[u8],
        prompt: &PromptTemplate,
    ) -> Result<String, ProviderError>;
}

pub trait OcrEngine: Send + Sync {
    fn id(&self) -> &str;
    fn extract_text(
        &self,
        image_id: &str,
        image_bytes: &[u8],
        prompt: &PromptTemplate,
    ) -> Result<String, ProviderError>;
}

/// A versioned instruction text sent to caption and OCR providers. The
/// shipped templates live under `prompts/` and are compiled in, so builds
/// record exactly which wording produced their captions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub prompt_id: String,
    pub text: String,
}

impl PromptTemplate {
    pub fn caption_v1() -> Self {
        PromptTemplate {
            prompt_id: "caption.v1".into(),
            text: include_str!("../../prompts/caption.v1.txt").into(),
        }
    }

    pub fn ocr_v1() -> Self {
        PromptTemplate {
            prompt_id: "ocr.v1".into(),
            text: include_str!("../../prompts/ocr.v1.txt").into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Http,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Mock => "mock",
            ProviderKind::Http => "http",
        })
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(ProviderKind::Mock),
            "http" => Ok(ProviderKind::Http),
            other => Err(format!("unknown provider kind {other:?}, expected mock or http")),
        }
    }
}

fn default_dim() -> usize {
    512
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_max_inflight() -> usize {
    4
}

/// Connection settings for one provider role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Base URL for `http` providers, e.g. `http://127.0.0.1:8080`.
    #[serde(default)]
    pub endpoint: Option<String>,
    pub model_id: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_inflight")]
    pub max_inflight: usize,
    /// Extra attempts after a transport-level failure. Zero keeps every
    /// failure loud, which is what batch builds want.
    #[serde(default)]
    pub retry_budget: u32,
}

impl ProviderConfig {
    pub fn mock(model_id: impl Into<String>, dim: usize) -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: None,
            model_id: model_id.into(),
            dim,
            timeout_ms: default_timeout_ms(),
            max_inflight: default_max_inflight(),
            retry_budget: 0,
        }
    }

    pub fn http(endpoint: impl Into<String>, model_id: impl Into<String>, dim: usize) -> Self {
        ProviderConfig {
            kind: ProviderKind::Http,
            endpoint: Some(endpoint.into()),
            model_id: model_id.into(),
            dim,
            timeout_ms: default_timeout_ms(),
            max_inflight: default_max_inflight(),
            retry_budget: 0,
        }
    }
}

/// The full complement of providers an index build or query needs.
/// `sentence` embeds queries, captions, and OCR text for the hybrid
/// scorer; it is usually the same model as `text`.
#[derive(Clone)]
pub struct ProviderSet {
    pub text: Arc<dyn TextEmbedder>,
    pub image: Arc<dyn ImageEmbedder>,
    pub captioner: Arc<dyn Captioner>,
    pub ocr: Arc<dyn OcrEngine>,
    pub sentence: Arc<dyn TextEmbedder>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_templates_are_compiled_in() {
        let caption = PromptTemplate::caption_v1();
        assert_eq!(caption.prompt_id, "caption.v1");
        assert!(caption.text.contains("###Instruction:"));
        assert!(caption.text.contains("###Response:"));
        let ocr = PromptTemplate::ocr_v1();
        assert_eq!(ocr.prompt_id, "ocr.v1");
        assert!(ocr.text.contains("###Response:"));
        assert_ne!(caption.text, ocr.text);
    }

    #[test]
    fn provider_kind_round_trips() {
        assert_eq!("mock".parse::<ProviderKind>().unwrap(), ProviderKind::Mock);
        assert_eq!("http".parse::<ProviderKind>().unwrap(), ProviderKind::Http);
        assert!("grpc".parse::<ProviderKind>().is_err());
        let json = serde_json::to_string(&ProviderKind::Http).unwrap();
        assert_eq!(json, "\"http\"");
    }

    #[test]
    fn config_defaults_fill_in() {
        let cfg: ProviderConfig =
            serde_json::from_str(r#"{"kind":"mock","model_id":"m"}"#).unwrap();
        assert_eq!(cfg.dim, 512);
        assert_eq!(cfg.timeout_ms, 10_000);
        assert_eq!(cfg.max_inflight, 4);
        assert_eq!(cfg.retry_budget, 0);
        assert_eq!(cfg.endpoint, None);
    }
}
