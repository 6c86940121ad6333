//! Core engine for multimodal document retrieval.
//!
//! The pipeline: parse document bundles, embed each image's surrounding
//! text, pixels, caption, and OCR text, fuse those vectors under a weight
//! scheme, search the fused index, then rerank hits with a hybrid score
//! that mixes lexical and semantic evidence. The `eval` module turns
//! per-query scores into summaries and reports; `fixture` ships a small
//! deterministic corpus used by the tests and examples.

pub mod bundle;
pub mod embedding;
pub mod eval;
pub mod fixture;
pub mod fusion;
pub mod index;
pub mod providers;
pub mod scoring;

pub use bundle::{
    enumerate_images, extract_surrounding_text, parse_bundle, write_bundle, BundleError,
    DocumentBundle, ImageAsset, Page, SurroundingContext, TextBlock,
};
pub use embedding::{cosine, dot, l2_norm, EmbeddingError, EmbeddingVector, NORM_TOLERANCE};
pub use fusion::{
    combine_embeddings, weighted_sum, FusionError, Modality, WeightScheme, WEIGHT_SUM_TOLERANCE,
};
pub use index::{
    build_index, deduplicate_diversify, load_index, persist_index, search, BuildConfig,
    IndexError, IndexRecord, QueryParams, SearchHit, VectorIndex, INDEX_FORMAT_VERSION,
};
pub use eval::{
    improvement, render_report_csv, render_report_md, run_eval, summarize, EvalError, EvalQuery,
    EvalRow, EvalRun, EvalSummary, ImprovementReport,
};
pub use providers::{
    Captioner, ImageEmbedder, OcrEngine, PromptTemplate, ProviderConfig, ProviderError,
    ProviderKind, ProviderSet, TextEmbedder,
};
pub use scoring::{
    component_scores, hybrid_score, normalize_text, rerank, round_half_up, semantic_similarity,
    text_match_score, text_match_score_with, ComponentScores, HybridScore, RankedHit, ScoreError,
    TextMatchWeights,
};
