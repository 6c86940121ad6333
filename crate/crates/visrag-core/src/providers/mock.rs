//! Deterministic offline providers. Text embeds via hashed bag-of-words
//! projection, images via a hash-seeded pseudo-random direction, and
//! caption/OCR read sidecar files when present. Everything is a pure
//! function of the input bytes, so builds and tests reproduce exactly.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingVector;
use crate::providers::{Captioner, ImageEmbedder, OcrEngine, PromptTemplate, ProviderError, TextEmbedder};

/// SplitMix64 step. Small enough to carry inline and stable across
/// platforms, which an RNG dependency would not guarantee.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn token_hash(token: &str) -> [u8; 32] {
    Sha256::digest(token.as_bytes()).into()
}

/// Hashed bag-of-words text embedder. Each lowercased alphanumeric token
/// lands on one axis chosen by its SHA-256, with a hash-chosen sign; the
/// accumulated counts are L2-normalized at the end. Integer accumulation
/// keeps the result independent of token order.
pub struct MockTextEmbedder {
    id: String,
    dim: usize,
    calls: AtomicUsize,
}

impl MockTextEmbedder {
    pub fn new(id: impl Into<String>, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        MockTextEmbedder {
            id: id.into(),
            dim,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl TextEmbedder for MockTextEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let lowered = text.to_lowercase();
        let mut counts: Vec<i64> = vec![0; self.dim];
        let mut any = false;
        for token in lowered.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            any = true;
            let h = token_hash(token);
            let idx = (u64::from_be_bytes(h[0..8].try_into().unwrap()) % self.dim as u64) as usize;
            let sign: i64 = if h[8] & 1 == 1 { -1 } else { 1 };
            counts[idx] += sign;
        }
        if !any {
            return Ok(EmbeddingVector::zero(self.dim));
        }
        let values: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
        EmbeddingVector::normalized_from(values)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))
    }
}

/// Hash-seeded pseudo-random image embedder. The payload's SHA-256 seeds a
/// SplitMix64 stream that fills the vector with values in [-1, 1] before
/// normalization, so nearly-identical payloads land in unrelated
/// directions, the way a real vision encoder treats byte noise.
pub struct MockImageEmbedder {
    id: String,
    dim: usize,
    calls: AtomicUsize,
}

impl MockImageEmbedder {
    pub fn new(id: impl Into<String>, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        MockImageEmbedder {
            id: id.into(),
            dim,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ImageEmbedder for MockImageEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image_bytes: &[u8]) -> Result<EmbeddingVector, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if image_bytes.is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        let h: [u8; 32] = Sha256::digest(image_bytes).into();
        let mut state = u64::from_be_bytes(h[0..8].try_into().unwrap());
        let values: Vec<f64> = (0..self.dim)
            .map(|_| (splitmix64(&mut state) as f64 / u64::MAX as f64) * 2.0 - 1.0)
            .collect();
        EmbeddingVector::normalized_from(values)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))
    }
}

/// Caption and OCR texts keyed by image_id, loaded from sidecar files
/// named `<image_id>.caption.txt` and `<image_id>.ocr.txt` anywhere under
/// a root directory.
#[derive(Debug, Clone, Default)]
pub struct SidecarStore {
    captions: BTreeMap<String, String>,
    ocr: BTreeMap<String, String>,
}

impl SidecarStore {
    pub fn empty() -> Self {
        SidecarStore::default()
    }

    pub fn load(root: &Path) -> std::io::Result<Self> {
        let mut store = SidecarStore::default();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir)? {
                let entry = entry?;
                let path = entry.path();
                if entry.file_type()?.is_dir() {
                    stack.push(path);
                    continue;
                }
                let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                    continue;
                };
                if let Some(image_id) = name.strip_suffix(".caption.txt") {
                    store
                        .captions
                        .insert(image_id.to_string(), std::fs::read_to_string(&path)?);
                } else if let Some(image_id) = name.strip_suffix(".ocr.txt") {
                    store
                        .ocr
                        .insert(image_id.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(store)
    }

    pub fn insert_caption(&mut self, image_id: impl Into<String>, text: impl Into<String>) {
        self.captions.insert(image_id.into(), text.into());
    }

    pub fn insert_ocr(&mut self, image_id: impl Into<String>, text: impl Into<String>) {
        self.ocr.insert(image_id.into(), text.into());
    }

    pub fn caption(&self, image_id: &str) -> Option<&str> {
        self.captions.get(image_id).map(String::as_str)
    }

    pub fn ocr(&self, image_id: &str) -> Option<&str> {
        self.ocr.get(image_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.captions.len() + self.ocr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty() && self.ocr.is_empty()
    }
}

fn payload_tag(image_bytes: &[u8]) -> String {
    let h = Sha256::digest(image_bytes);
    hex::encode(&h[..6])
}

/// Sidecar-backed captioner. Falls back to a stable `mock-caption:<hash>`
/// marker so a pipeline without sidecars still produces distinct,
/// reproducible captions.
pub struct MockCaptioner {
    id: String,
    sidecars: SidecarStore,
    calls: AtomicUsize,
}

impl MockCaptioner {
    pub fn new(id: impl Into<String>, sidecars: SidecarStore) -> Self {
        MockCaptioner {
            id: id.into(),
            sidecars,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Captioner for MockCaptioner {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate_caption(
        &self,
        image_id: &str,
        image_bytes: &[u8],
        _prompt: &PromptTemplate,
    ) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if image_bytes.is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        match self.sidecars.caption(image_id) {
            Some(text) => Ok(text.to_string()),
            None => Ok(format!("mock-caption:{}", payload_tag(image_bytes))),
        }
    }
}

/// Sidecar-backed OCR engine, mirroring `MockCaptioner`.
pub struct MockOcr {
    id: String,
    sidecars: SidecarStore,
    calls: AtomicUsize,
}

impl MockOcr {
    pub fn new(id: impl Into<String>, sidecars: SidecarStore) -> Self {
        MockOcr {
            id: id.into(),
            sidecars,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl OcrEngine for MockOcr {
    fn id(&self) -> &str {
        &self.id
    }

    fn extract_text(
        &self,
        image_id: &str,
        image_bytes: &[u8],
        _prompt: &PromptTemplate,
    ) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if image_bytes.is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        match self.sidecars.ocr(image_id) {
            Some(text) => Ok(text.to_string()),
            None => Ok(format!("mock-ocr:{}", payload_tag(image_bytes))),
        }
    }
}
