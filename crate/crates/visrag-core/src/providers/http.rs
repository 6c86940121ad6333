//! Adapter for a remote inference service speaking a small JSON protocol:
//!
//! - `POST {endpoint}/v1/embed`   `{kind, text | image_b64, model_id, dim}` -> `{values}`
//! - `POST {endpoint}/v1/caption` `{image_b64, prompt, model_id}` -> `{caption}`
//! - `POST {endpoint}/v1/ocr`     `{image_b64, prompt, model_id}` -> `{text}`
//!
//! The adapter normalizes embedding responses, bounds concurrent requests
//! per provider, and treats anything the service gets wrong (bad status,
//! bad JSON, zero or non-finite values) as `Unavailable` so callers never
//! see half-valid vectors.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::providers::{
    Captioner, ImageEmbedder, OcrEngine, PromptTemplate, ProviderConfig, ProviderError,
    TextEmbedder,
};

/// Counting semaphore over Mutex + Condvar. Caps in-flight requests
/// without pulling an async runtime into an otherwise synchronous crate.
pub(crate) struct Gate {
    state: Arc<(Mutex<usize>, Condvar)>,
    limit: usize,
}

pub(crate) struct GatePermit {
    state: Arc<(Mutex<usize>, Condvar)>,
}

impl Gate {
    pub(crate) fn new(limit: usize) -> Self {
        Gate {
            state: Arc::new((Mutex::new(0), Condvar::new())),
            limit: limit.max(1),
        }
    }

    pub(crate) fn acquire(&self) -> GatePermit {
        let (lock, cv) = &*self.state;
        let mut inflight = lock.lock().unwrap();
        while *inflight >= self.limit {
            inflight = cv.wait(inflight).unwrap();
        }
        *inflight += 1;
        GatePermit {
            state: Arc::clone(&self.state),
        }
    }

    #[cfg(test)]
    fn inflight(&self) -> usize {
        *self.state.0.lock().unwrap()
    }
}

impl Drop for GatePermit {
    fn drop(&mut self) {
        let (lock, cv) = &*self.state;
        let mut inflight = lock.lock().unwrap();
        *inflight -= 1;
        cv.notify_one();
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_b64: Option<String>,
    model_id: &'a str,
    dim: usize,
}

#[derive(Deserialize)]
struct EmbedResponse {
    values: Vec<f64>,
}

#[derive(Serialize)]
struct VisionRequest<'a> {
    image_b64: String,
    prompt: &'a str,
    model_id: &'a str,
}

#[derive(Deserialize)]
struct CaptionResponse {
    caption: String,
}

#[derive(Deserialize)]
struct OcrResponse {
    text: String,
}

/// One remote provider role. Implements all four traits; construct one
/// instance per role so each can point at its own model or endpoint.
pub struct HttpProvider {
    config: ProviderConfig,
    endpoint: String,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| ProviderError::Unavailable("http provider has no endpoint".into()))?;
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ProviderError::Unavailable(format!("http client: {e}")))?;
        let gate = Gate::new(config.max_inflight);
        Ok(HttpProvider {
            config,
            endpoint,
            client,
            gate,
        })
    }

    /// POST a JSON body and deserialize a JSON reply, retrying transport
    /// failures up to the configured budget.
    fn post<T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: &impl Serialize,
    ) -> Result<T, ProviderError> {
        let url = format!("{}{}", self.endpoint, path);
        let _permit = self.gate.acquire();
        let mut last_err = String::new();
        for _ in 0..=self.config.retry_budget {
            let sent = self.client.post(&url).json(body).send();
            let response = match sent {
                Ok(r) => r,
                Err(e) => {
                    last_err = format!("request to {url} failed: {e}");
                    continue;
                }
            };
            let status = response.status();
            if !status.is_success() {
                last_err = format!("{url} returned {status}");
                continue;
            }
            return match response.json::<T>() {
                Ok(parsed) => Ok(parsed),
                Err(e) => Err(ProviderError::Unavailable(format!(
                    "{url} returned malformed body: {e}"
                ))),
            };
        }
        Err(ProviderError::Unavailable(last_err))
    }

    fn check_vector(&self, values: Vec<f64>) -> Result<EmbeddingVector, ProviderError> {
        if values.len() != self.config.dim {
            return Err(ProviderError::DimensionMismatch {
                expected: self.config.dim,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::Unavailable(
                "embedding response contains non-finite values".into(),
            ));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(ProviderError::Unavailable(
                "embedding response is the zero vector".into(),
            ));
        }
        EmbeddingVector::normalized_from(values)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))
    }
}

impl TextEmbedder for HttpProvider {
    fn id(&self) -> &str {
        &self.config.model_id
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        // Blank text embeds to zero locally; no point paying for a round
        // trip the scorer will ignore anyway.
        if text.trim().is_empty() {
            return Ok(EmbeddingVector::zero(self.config.dim));
        }
        let response: EmbedResponse = self.post(
            "/v1/embed",
            &EmbedRequest {
                kind: "text",
                text: Some(text),
                image_b64: None,
                model_id: &self.config.model_id,
                dim: self.config.dim,
            },
        )?;
        self.check_vector(response.values)
    }
}

impl ImageEmbedder for HttpProvider {
    fn id(&self) -> &str {
        &self.config.model_id
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_image(&self, image_bytes: &[u8]) -> Result<EmbeddingVector, ProviderError> {
        if image_bytes.is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        let response: EmbedResponse = self.post(
            "/v1/embed",
            &EmbedRequest {
                kind: "image",
                text: None,
                image_b64: Some(BASE64.encode(image_bytes)),
                model_id: &self.config.model_id,
                dim: self.config.dim,
            },
        )?;
        self.check_vector(response.values)
    }
}

impl Captioner for HttpProvider {
    fn id(&self) -> &str {
        &self.config.model_id
    }

    fn generate_caption(
        &self,
        _image_id: &str,
        image_bytes: &[u8],
        prompt: &PromptTemplate,
    ) -> Result<String, ProviderError> {
        if image_bytes.is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        let response: CaptionResponse = self.post(
            "/v1/caption",
            &VisionRequest {
                image_b64: BASE64.encode(image_bytes),
                prompt: &prompt.text,
                model_id: &self.config.model_id,
            },
        )?;
        Ok(response.caption)
    }
}

impl OcrEngine for HttpProvider {
    fn id(&self) -> &str {
        &self.config.model_id
    }

    fn extract_text(
        &self,
        _image_id: &str,
        image_bytes: &[u8],
        prompt: &PromptTemplate,
    ) -> Result<String, ProviderError> {
        if image_bytes.is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        let response: OcrResponse = self.post(
            "/v1/ocr",
            &VisionRequest {
                image_b64: BASE64.encode(image_bytes),
                prompt: &prompt.text,
                model_id: &self.config.model_id,
            },
        )?;
        Ok(response.text)
    }
}
