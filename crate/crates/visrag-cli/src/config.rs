//! Config file loading and provider wiring.
//!
//! Precedence is flags > config file > built-in defaults. The config file is
//! a single JSON document, located either by `--config` or the
//! `VISRAG_CONFIG` environment variable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use visrag_core::fusion::WeightScheme;
use visrag_core::providers::http::HttpProvider;
use visrag_core::providers::mock::{
    MockCaptioner, MockImageEmbedder, MockOcr, MockTextEmbedder, SidecarStore,
};
use visrag_core::providers::{
    Captioner, ImageEmbedder, OcrEngine, ProviderConfig, ProviderKind, ProviderSet, TextEmbedder,
};

use crate::CliError;

/// Provider roles a config may override. Anything else is a typo.
pub const ROLES: [&str; 5] = ["text_embed", "image_embed", "caption", "ocr", "sentence_sim"];

const DEFAULT_DIM: usize = 512;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus_dir: PathBuf,
    pub index_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus_dir: PathBuf::from("corpus"),
            index_dir: PathBuf::from("indexes"),
            report_dir: PathBuf::from("reports"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// role -> provider; omitted roles fall back to mock providers.
    pub providers: BTreeMap<String, ProviderConfig>,
    pub window_chars: usize,
    pub k: usize,
    pub sim_threshold: f64,
    pub max_per_doc: usize,
    /// Scheme names evaluated by default. Each must be a preset or appear
    /// in `scheme_definitions`.
    pub schemes: Vec<String>,
    pub scheme_definitions: Vec<WeightScheme>,
    pub paths: PathsConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            providers: BTreeMap::new(),
            window_chars: 512,
            k: 10,
            sim_threshold: 0.95,
            max_per_doc: 2,
            schemes: vec![
                "text_only".to_string(),
                "text_image".to_string(),
                "text_image_caption".to_string(),
                "full".to_string(),
            ],
            scheme_definitions: Vec::new(),
            paths: PathsConfig::default(),
        }
    }
}

pub fn load_config(flag: Option<&Path>) -> Result<CliConfig, CliError> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os("VISRAG_CONFIG").map(PathBuf::from),
    };
    let config = match path {
        None => CliConfig::default(),
        Some(p) => {
            let content = std::fs::read_to_string(&p).map_err(|e| {
                CliError::Validation(format!("cannot read config {}: {e}", p.display()))
            })?;
            serde_json::from_str(&content).map_err(|e| {
                CliError::Validation(format!("invalid config {}: {e}", p.display()))
            })?
        }
    };
    validate_config(&config)?;
    Ok(config)
}

fn validate_config(config: &CliConfig) -> Result<(), CliError> {
    for role in config.providers.keys() {
        if !ROLES.contains(&role.as_str()) {
            return Err(CliError::Validation(format!(
                "unknown provider role '{role}' (expected one of {})",
                ROLES.join(", ")
            )));
        }
    }
    for name in &config.schemes {
        resolve_scheme(name, config)?;
    }
    if config.k == 0 {
        return Err(CliError::Validation("k must be at least 1".into()));
    }
    Ok(())
}

/// Look a scheme up by name: user definitions first, then the presets.
pub fn resolve_scheme(name: &str, config: &CliConfig) -> Result<WeightScheme, CliError> {
    if let Some(s) = config.scheme_definitions.iter().find(|s| s.name() == name) {
        return Ok(s.clone());
    }
    WeightScheme::by_name(name).ok_or_else(|| {
        let mut known: Vec<String> = WeightScheme::presets()
            .iter()
            .map(|s| s.name().to_string())
            .collect();
        known.extend(config.scheme_definitions.iter().map(|s| s.name().to_string()));
        CliError::Validation(format!(
            "unknown scheme '{name}' (known: {})",
            known.join(", ")
        ))
    })
}

fn role_config(config: &CliConfig, role: &str, fallback_id: &str) -> ProviderConfig {
    config
        .providers
        .get(role)
        .cloned()
        .unwrap_or_else(|| ProviderConfig::mock(fallback_id, DEFAULT_DIM))
}

fn http_provider(rc: ProviderConfig) -> Result<HttpProvider, CliError> {
    HttpProvider::new(rc).map_err(|e| CliError::Provider(e.to_string()))
}

pub fn text_embedder(
    config: &CliConfig,
    role: &str,
    fallback_id: &str,
) -> Result<Arc<dyn TextEmbedder>, CliError> {
    let rc = role_config(config, role, fallback_id);
    Ok(match rc.kind {
        ProviderKind::Mock => Arc::new(MockTextEmbedder::new(rc.model_id.clone(), rc.dim)),
        ProviderKind::Http => Arc::new(http_provider(rc)?),
    })
}

fn image_embedder(config: &CliConfig) -> Result<Arc<dyn ImageEmbedder>, CliError> {
    let rc = role_config(config, "image_embed", "mock-image-v1");
    Ok(match rc.kind {
        ProviderKind::Mock => Arc::new(MockImageEmbedder::new(rc.model_id.clone(), rc.dim)),
        ProviderKind::Http => Arc::new(http_provider(rc)?),
    })
}

fn captioner(config: &CliConfig, sidecars: &SidecarStore) -> Result<Arc<dyn Captioner>, CliError> {
    let rc = role_config(config, "caption", "mock-caption-v1");
    Ok(match rc.kind {
        ProviderKind::Mock => Arc::new(MockCaptioner::new(rc.model_id.clone(), sidecars.clone())),
        ProviderKind::Http => Arc::new(http_provider(rc)?),
    })
}

fn ocr_engine(config: &CliConfig, sidecars: &SidecarStore) -> Result<Arc<dyn OcrEngine>, CliError> {
    let rc = role_config(config, "ocr", "mock-ocr-v1");
    Ok(match rc.kind {
        ProviderKind::Mock => Arc::new(MockOcr::new(rc.model_id.clone(), sidecars.clone())),
        ProviderKind::Http => Arc::new(http_provider(rc)?),
    })
}

/// Wire up all five roles. Mock caption/OCR providers read sidecar files
/// under `sidecar_root` when given (normally the corpus directory).
pub fn build_provider_set(
    config: &CliConfig,
    sidecar_root: Option<&Path>,
) -> Result<ProviderSet, CliError> {
    let sidecars = match sidecar_root {
        Some(root) => SidecarStore::load(root).map_err(|e| {
            CliError::Validation(format!("cannot read sidecars under {}: {e}", root.display()))
        })?,
        None => SidecarStore::empty(),
    };
    Ok(ProviderSet {
        text: text_embedder(config, "text_embed", "mock-text-v1")?,
        image: image_embedder(config)?,
        captioner: captioner(config, &sidecars)?,
        ocr: ocr_engine(config, &sidecars)?,
        sentence: text_embedder(config, "sentence_sim", "mock-sentence-v1")?,
    })
}
