//! Index construction, exact search, result diversification, and a
//! checksummed JSONL persistence format.
//!
//! Corpora here are thousands of images, not millions, so search is an
//! exhaustive cosine scan: simple, exact, and fast enough that an ANN
//! structure would only add approximation error to the evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bundle::{enumerate_images, extract_surrounding_text, BundleError, DocumentBundle};
use crate::embedding::{cosine, EmbeddingVector};
use crate::fusion::{combine_embeddings, FusionError, Modality, WeightScheme};
use crate::providers::{PromptTemplate, ProviderError, ProviderSet};

/// On-disk format revision. Bump when the line layout changes shape.
pub const INDEX_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("corpus has no images to index")]
    EmptyCorpus,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("duplicate record id {0}")]
    DuplicateRecordId(String),
    #[error("index format version {found} is not supported (expected {INDEX_FORMAT_VERSION})")]
    FormatVersionMismatch { found: u64 },
    #[error("index checksum does not match its contents")]
    ChecksumMismatch,
    #[error("malformed index: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

/// Everything that went into producing an index, for cache invalidation
/// and provenance. Two indexes with equal configs are interchangeable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub text_embedder: Option<String>,
    pub image_embedder: Option<String>,
    pub captioner: Option<String>,
    pub ocr_engine: Option<String>,
    pub caption_prompt_id: Option<String>,
    pub ocr_prompt_id: Option<String>,
    pub window_chars: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            text_embedder: None,
            image_embedder: None,
            captioner: None,
            ocr_engine: None,
            caption_prompt_id: None,
            ocr_prompt_id: None,
            window_chars: 512,
        }
    }
}

/// One indexed image with all the signals that produced its vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    /// `{doc_id}/{image_id}`, unique across the corpus.
    pub record_id: String,
    pub doc_id: String,
    pub image_id: String,
    pub scheme_name: String,
    pub content_hash: String,
    pub context_text: String,
    pub caption: Option<String>,
    pub ocr_text: Option<String>,
    pub combined: EmbeddingVector,
    pub per_modality: BTreeMap<Modality, EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    dim: usize,
    scheme: WeightScheme,
    build_config: BuildConfig,
    records: Vec<IndexRecord>,
}

impl VectorIndex {
    /// Assemble an index from pre-built records. Records are sorted by
    /// record_id; duplicates and dimension drift are rejected.
    pub fn from_records(
        scheme: WeightScheme,
        build_config: BuildConfig,
        records: Vec<IndexRecord>,
    ) -> Result<Self, IndexError> {
        let dim = match records.first() {
            Some(r) => r.combined.dim(),
            None => return Err(IndexError::EmptyCorpus),
        };
        VectorIndex::assemble(dim, scheme, build_config, records)
    }

    /// An index over nothing. Searches succeed and return no hits; builds
    /// never produce this, but a reader may encounter one.
    pub fn empty(dim: usize, scheme: WeightScheme, build_config: BuildConfig) -> Self {
        VectorIndex {
            dim,
            scheme,
            build_config,
            records: Vec::new(),
        }
    }

    fn assemble(
        dim: usize,
        scheme: WeightScheme,
        build_config: BuildConfig,
        mut records: Vec<IndexRecord>,
    ) -> Result<Self, IndexError> {
        records.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for r in &records {
            if r.combined.dim() != dim {
                return Err(IndexError::DimMismatch {
                    expected: dim,
                    actual: r.combined.dim(),
                });
            }
            for v in r.per_modality.values() {
                if v.dim() != dim {
                    return Err(IndexError::DimMismatch {
                        expected: dim,
                        actual: v.dim(),
                    });
                }
            }
        }
        for r in &records {
            if !seen.insert(&r.record_id) {
                return Err(IndexError::DuplicateRecordId(r.record_id.clone()));
            }
        }
        Ok(VectorIndex {
            dim,
            scheme,
            build_config,
            records,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    pub fn build_config(&self) -> &BuildConfig {
        &self.build_config
    }

    pub fn records(&self) -> &[IndexRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, record_id: &str) -> Option<&IndexRecord> {
        self.records
            .binary_search_by(|r| r.record_id.as_str().cmp(record_id))
            .ok()
            .map(|i| &self.records[i])
    }
}

/// The build config a fresh `build_index` over these providers would
/// record. Lets callers decide whether a cached index is still current
/// without paying for a rebuild.
pub fn resolve_build_config(
    providers: &ProviderSet,
    scheme: &WeightScheme,
    window_chars: usize,
) -> BuildConfig {
    let use_caption = scheme.weight(Modality::Caption) > 0.0;
    let use_ocr = scheme.weight(Modality::Ocr) > 0.0;
    BuildConfig {
        text_embedder: (scheme.weight(Modality::Text) > 0.0)
            .then(|| providers.text.id().to_string()),
        image_embedder: (scheme.weight(Modality::Image) > 0.0)
            .then(|| providers.image.id().to_string()),
        captioner: use_caption.then(|| providers.captioner.id().to_string()),
        ocr_engine: use_ocr.then(|| providers.ocr.id().to_string()),
        caption_prompt_id: use_caption.then(|| PromptTemplate::caption_v1().prompt_id),
        ocr_prompt_id: use_ocr.then(|| PromptTemplate::ocr_v1().prompt_id),
        window_chars,
    }
}

/// Embed and fuse every image of every bundle under `scheme`.
///
/// Modalities the scheme weights at zero are skipped entirely: their
/// providers are never called and the record stores no vector for them.
/// Surrounding text is always extracted and stored, it documents the
/// record even when the text channel carries no weight.
pub fn build_index(
    bundles: &[DocumentBundle],
    providers: &ProviderSet,
    scheme: &WeightScheme,
    config: &BuildConfig,
) -> Result<VectorIndex, IndexError> {
    let dim = providers.text.dim();
    if providers.image.dim() != dim {
        return Err(IndexError::DimMismatch {
            expected: dim,
            actual: providers.image.dim(),
        });
    }
    let caption_prompt = PromptTemplate::caption_v1();
    let ocr_prompt = PromptTemplate::ocr_v1();
    let use_text = scheme.weight(Modality::Text) > 0.0;
    let use_image = scheme.weight(Modality::Image) > 0.0;
    let use_caption = scheme.weight(Modality::Caption) > 0.0;
    let use_ocr = scheme.weight(Modality::Ocr) > 0.0;

    let mut records: Vec<IndexRecord> = Vec::new();
    for bundle in bundles {
        for image in enumerate_images(bundle) {
            let context = extract_surrounding_text(bundle, &image.image_id, config.window_chars)?;
            let payload = bundle.load_payload(image)?;
            let mut per_modality: BTreeMap<Modality, EmbeddingVector> = BTreeMap::new();
            if use_text {
                per_modality.insert(Modality::Text, providers.text.embed_text(&context.context_text)?);
            }
            if use_image {
                per_modality.insert(Modality::Image, providers.image.embed_image(&payload)?);
            }
            let caption = if use_caption {
                let text =
                    providers
                        .captioner
                        .generate_caption(&image.image_id, &payload, &caption_prompt)?;
                per_modality.insert(Modality::Caption, providers.text.embed_text(&text)?);
                Some(text)
            } else {
                None
            };
            let ocr_text = if use_ocr {
                let text = providers
                    .ocr
                    .extract_text(&image.image_id, &payload, &ocr_prompt)?;
                per_modality.insert(Modality::Ocr, providers.text.embed_text(&text)?);
                Some(text)
            } else {
                None
            };
            let combined = combine_embeddings(&per_modality, scheme, true)?;
            records.push(IndexRecord {
                record_id: format!("{}/{}", bundle.doc_id, image.image_id),
                doc_id: bundle.doc_id.clone(),
                image_id: image.image_id.clone(),
                scheme_name: scheme.name().to_string(),
                content_hash: image.content_hash.clone(),
                context_text: context.context_text,
                caption,
                ocr_text,
                combined,
                per_modality,
            });
        }
    }
    let resolved = resolve_build_config(providers, scheme, config.window_chars);
    VectorIndex::from_records(scheme.clone(), resolved, records)
}

/// A scored index record. Borrowed, so result sets stay cheap to shuffle
/// through dedup and rerank stages.
#[derive(Debug, Clone, Copy)]
pub struct SearchHit<'a> {
    pub record: &'a IndexRecord,
    pub score: f64,
}

/// Exhaustive cosine search. Ties break toward the lexically smaller
/// record_id so equal-score results are stable across runs.
pub fn search<'a>(
    index: &'a VectorIndex,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<SearchHit<'a>>, IndexError> {
    if k == 0 {
        return Err(IndexError::InvalidArgument("k must be at least 1".into()));
    }
    if query.dim() != index.dim() {
        return Err(IndexError::DimMismatch {
            expected: index.dim(),
            actual: query.dim(),
        });
    }
    let mut hits: Vec<SearchHit<'a>> = index
        .records()
        .iter()
        .map(|record| {
            let score = cosine(query, &record.combined).expect("dims already checked");
            SearchHit { record, score }
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("cosine is finite")
            .then_with(|| a.record.record_id.cmp(&b.record.record_id))
    });
    hits.truncate(k);
    Ok(hits)
}

fn default_k() -> usize {
    10
}

fn default_sim_threshold() -> f64 {
    0.95
}

fn default_max_per_doc() -> usize {
    2
}

/// Knobs for the search + diversify stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Hits whose combined-vector cosine against an already kept hit
    /// exceeds this are dropped as near-duplicates.
    #[serde(default = "default_sim_threshold")]
    pub sim_threshold: f64,
    #[serde(default = "default_max_per_doc")]
    pub max_per_doc: usize,
}

impl Default for QueryParams {
    fn default() -> Self {
        QueryParams {
            k: default_k(),
            sim_threshold: default_sim_threshold(),
            max_per_doc: default_max_per_doc(),
        }
    }
}

/// Greedy filter over a ranked hit list. A hit is dropped when it shares
/// a content hash with a kept hit, sits strictly above the similarity
/// threshold against any kept hit, or would be the `max_per_doc + 1`-th
/// hit from one document. Order is otherwise preserved.
pub fn deduplicate_diversify<'a>(
    hits: &[SearchHit<'a>],
    params: &QueryParams,
) -> Vec<SearchHit<'a>> {
    let mut kept: Vec<SearchHit<'a>> = Vec::new();
    let mut per_doc: BTreeMap<&str, usize> = BTreeMap::new();
    'candidates: for hit in hits {
        if per_doc.get(hit.record.doc_id.as_str()).copied().unwrap_or(0) >= params.max_per_doc {
            continue;
        }
        for k in &kept {
            if k.record.content_hash == hit.record.content_hash {
                continue 'candidates;
            }
            let sim = cosine(&k.record.combined, &hit.record.combined)
                .expect("index records share one dimension");
            if sim > params.sim_threshold {
                continue 'candidates;
            }
        }
        *per_doc.entry(hit.record.doc_id.as_str()).or_insert(0) += 1;
        kept.push(*hit);
    }
    kept
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    version: u64,
    dim: usize,
    scheme: WeightScheme,
    build_config: BuildConfig,
    count: usize,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

#[derive(Serialize, Deserialize)]
struct ChecksumLine {
    checksum_sha256: String,
}

/// Write the index as JSON lines: header, records sorted by record_id,
/// and a trailing SHA-256 over every preceding byte. The file lands via
/// temp-file-and-rename so readers never observe a half-written index.
pub fn persist_index(index: &VectorIndex, path: &Path) -> Result<(), IndexError> {
    let mut body = String::new();
    let header = IndexHeader {
        version: INDEX_FORMAT_VERSION,
        dim: index.dim,
        scheme: index.scheme.clone(),
        build_config: index.build_config.clone(),
        count: index.records.len(),
    };
    body.push_str(&serde_json::to_string(&header).expect("header serializes"));
    body.push('\n');
    for record in &index.records {
        body.push_str(&serde_json::to_string(record).expect("record serializes"));
        body.push('\n');
    }
    let checksum = ChecksumLine {
        checksum_sha256: hex::encode(Sha256::digest(body.as_bytes())),
    };
    body.push_str(&serde_json::to_string(&checksum).expect("checksum serializes"));
    body.push('\n');

    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, body.as_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Read an index back, strictest check first: format version, then the
/// whole-file checksum, then per-record validation. A file whose final
/// line is not a parseable checksum counts as corrupt, not merely
/// malformed, since truncation is the usual cause.
pub fn load_index(path: &Path) -> Result<VectorIndex, IndexError> {
    let content = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = content.split_inclusive('\n').collect();
    if lines.is_empty() {
        return Err(IndexError::Format("index file is empty".into()));
    }
    let header_line = lines[0];
    let probe: VersionProbe = serde_json::from_str(header_line)
        .map_err(|e| IndexError::Format(format!("bad header: {e}")))?;
    if probe.version != INDEX_FORMAT_VERSION {
        return Err(IndexError::FormatVersionMismatch {
            found: probe.version,
        });
    }
    if lines.len() < 2 {
        return Err(IndexError::ChecksumMismatch);
    }
    let checksum_line = lines[lines.len() - 1];
    let body_len: usize = lines[..lines.len() - 1].iter().map(|l| l.len()).sum();
    let declared: ChecksumLine =
        serde_json::from_str(checksum_line).map_err(|_| IndexError::ChecksumMismatch)?;
    let actual = hex::encode(Sha256::digest(&content.as_bytes()[..body_len]));
    if declared.checksum_sha256 != actual {
        return Err(IndexError::ChecksumMismatch);
    }

    let header: IndexHeader = serde_json::from_str(header_line)
        .map_err(|e| IndexError::Format(format!("bad header: {e}")))?;
    let mut records: Vec<IndexRecord> = Vec::with_capacity(header.count);
    for line in &lines[1..lines.len() - 1] {
        let record: IndexRecord = serde_json::from_str(line)
            .map_err(|e| IndexError::Format(format!("bad record: {e}")))?;
        record
            .combined
            .validate()
            .map_err(|e| IndexError::Format(format!("{}: {e}", record.record_id)))?;
        for v in record.per_modality.values() {
            v.validate()
                .map_err(|e| IndexError::Format(format!("{}: {e}", record.record_id)))?;
        }
        records.push(record);
    }
    if records.len() != header.count {
        return Err(IndexError::Format(format!(
            "header says {} records, found {}",
            header.count,
            records.len()
        )));
    }
    for w in records.windows(2) {
        if w[1].record_id <= w[0].record_id {
            return Err(IndexError::Format(format!(
                "records out of order: {} then {}",
                w[0].record_id, w[1].record_id
            )));
        }
    }
    VectorIndex::assemble(header.dim, header.scheme, header.build_config, records)
}
