//! End-to-end library tests over the synthetic corpus: bundle parsing,
//! index builds under several weight schemes, persistence, and the ranking
//! behavior the retrieval comparisons depend on.

use std::sync::Arc;

use visrag_core::eval::run_eval;
use visrag_core::fixture::{
    self, ECHECKIN_CAPTION, ECHECKIN_CONTEXT, ECHECKIN_OCR, ECHECKIN_QUESTION, ECHECKIN_RECORD_ID,
};
use visrag_core::fusion::{Modality, WeightScheme};
use visrag_core::index::{
    build_index, deduplicate_diversify, load_index, persist_index, search, BuildConfig,
    QueryParams,
};
use visrag_core::providers::mock::{
    MockCaptioner, MockImageEmbedder, MockOcr, MockTextEmbedder, SidecarStore,
};
use visrag_core::providers::ProviderSet;
use visrag_core::scoring::{rerank, TextMatchWeights};

const DIM: usize = 256;

#[test]
fn full_scheme_indexes_every_image_with_all_modalities() {
    let dir = tempfile::TempDir::new().unwrap();
    let bundles = fixture::write_corpus(dir.path()).unwrap();
    let providers = fixture::mock_provider_set_with_sidecars(DIM, dir.path()).unwrap();
    let index = build_index(
        &bundles,
        &providers,
        &WeightScheme::full(),
        &BuildConfig::default(),
    )
    .unwrap();
    assert_eq!(index.len(), 70);
    assert_eq!(index.dim(), DIM);
    for record in index.records() {
        assert_eq!(record.per_modality.len(), 4);
        assert!(record.caption.is_some());
        assert!(record.ocr_text.is_some());
        assert_eq!(record.record_id, format!("{}/{}", record.doc_id, record.image_id));
    }
    // Records are sorted for binary search and stable serialization.
    let mut ids: Vec<&str> = index.records().iter().map(|r| r.record_id.as_str()).collect();
    let sorted = {
        let mut s = ids.clone();
        s.sort_unstable();
        s
    };
    assert_eq!(ids, sorted);
    ids.dedup();
    assert_eq!(ids.len(), 70);

    let demo = index.get(ECHECKIN_RECORD_ID).unwrap();
    assert_eq!(demo.context_text, ECHECKIN_CONTEXT);
    assert_eq!(demo.caption.as_deref(), Some(ECHECKIN_CAPTION));
    assert_eq!(demo.ocr_text.as_deref(), Some(ECHECKIN_OCR));

    // d19/d20 have no sidecar files, so the mocks fall back to tagged text.
    let fallback = index.get("d19/d19-img1").unwrap();
    assert!(fallback.caption.as_deref().unwrap().starts_with("mock-caption:"));
    assert!(fallback.ocr_text.as_deref().unwrap().starts_with("mock-ocr:"));
}

#[test]
fn zero_weight_modalities_never_touch_their_providers() {
    let dir = tempfile::TempDir::new().unwrap();
    let bundles = fixture::write_corpus(dir.path()).unwrap();
    let sidecars = SidecarStore::load(dir.path()).unwrap();
    let text = Arc::new(MockTextEmbedder::new("mock-text-v1", DIM));
    let image = Arc::new(MockImageEmbedder::new("mock-image-v1", DIM));
    let captioner = Arc::new(MockCaptioner::new("mock-caption-v1", sidecars.clone()));
    let ocr = Arc::new(MockOcr::new("mock-ocr-v1", sidecars));
    let providers = ProviderSet {
        text: text.clone(),
        image: image.clone(),
        captioner: captioner.clone(),
        ocr: ocr.clone(),
        sentence: text.clone(),
    };
    let index = build_index(
        &bundles,
        &providers,
        &WeightScheme::text_image(),
        &BuildConfig::default(),
    )
    .unwrap();
    assert_eq!(index.len(), 70);
    assert_eq!(captioner.call_count(), 0);
    assert_eq!(ocr.call_count(), 0);
    assert_eq!(image.call_count(), 70);
    for record in index.records() {
        assert_eq!(record.per_modality.len(), 2);
        assert!(record.caption.is_none());
        assert!(record.ocr_text.is_none());
        assert!(!record.context_text.is_empty());
    }
    // The recorded provenance only names what the build actually used.
    assert_eq!(index.build_config().captioner, None);
    assert_eq!(index.build_config().ocr_engine, None);
    assert_eq!(
        index.build_config().text_embedder.as_deref(),
        Some("mock-text-v1")
    );
}

#[test]
fn calibrated_demo_query_reproduces_pinned_components() {
    let dir = tempfile::TempDir::new().unwrap();
    let bundles = fixture::write_corpus(dir.path()).unwrap();
    let providers = fixture::calibrated_provider_set(DIM, dir.path()).unwrap();
    let index = build_index(
        &bundles,
        &providers,
        &WeightScheme::full(),
        &BuildConfig::default(),
    )
    .unwrap();
    let query_vec = providers.text.embed_text(ECHECKIN_QUESTION).unwrap();
    let hits = search(&index, &query_vec, 10).unwrap();
    let kept = deduplicate_diversify(&hits, &QueryParams::default());
    let ranked = rerank(
        &kept,
        ECHECKIN_QUESTION,
        providers.sentence.as_ref(),
        &WeightScheme::full(),
        TextMatchWeights::default(),
    )
    .unwrap();
    let top = &ranked[0];
    assert_eq!(top.record.record_id, ECHECKIN_RECORD_ID);

    let c = &top.hybrid.components;
    // Three of the question's eleven tokens appear in the context and the
    // phrase is broken, so the lexical component is 3/22.
    assert!((c.text_match - 3.0 / 22.0).abs() < 1e-12);
    assert!((c.image_sim.unwrap() - fixture::CALIBRATED_IMAGE_SIM).abs() < 1e-9);
    assert!((c.caption_sim.unwrap() - fixture::CALIBRATED_CAPTION_SIM).abs() < 1e-9);
    assert!((c.ocr_sim.unwrap() - fixture::CALIBRATED_OCR_SIM).abs() < 1e-9);

    let expected = 0.30 * (3.0 / 22.0) + 0.15 * 0.333 + 0.25 * 0.592 + 0.30 * 0.615;
    assert!((top.hybrid.value01 - expected).abs() < 1e-9);
    assert_eq!(top.hybrid.display100(), "42.34");
}

#[test]
fn visual_answer_queries_score_higher_under_full_fusion() {
    let dir = tempfile::TempDir::new().unwrap();
    let bundles = fixture::write_corpus(dir.path()).unwrap();
    let providers = fixture::mock_provider_set_with_sidecars(DIM, dir.path()).unwrap();
    let config = BuildConfig::default();
    let methods = vec![
        (
            "text_only".to_string(),
            build_index(&bundles, &providers, &WeightScheme::text_only(), &config).unwrap(),
        ),
        (
            "full".to_string(),
            build_index(&bundles, &providers, &WeightScheme::full(), &config).unwrap(),
        ),
    ];
    let queries = fixture::queries();
    let runs = run_eval(
        &queries,
        &methods,
        &providers,
        &QueryParams::default(),
        TextMatchWeights::default(),
    )
    .unwrap();
    let text_only = &runs[0];
    let full = &runs[1];
    assert_eq!(text_only.method, "text_only");
    assert_eq!(full.method, "full");
    for qid in fixture::visual_answer_qids() {
        let t = text_only.rows.iter().find(|r| r.qid == *qid).unwrap();
        let f = full.rows.iter().find(|r| r.qid == *qid).unwrap();
        assert!(
            f.score01 >= t.score01,
            "{qid}: full {} < text_only {}",
            f.score01,
            t.score01
        );
    }
}

#[test]
fn full_fusion_retrieves_the_sidecar_target_for_visual_queries() {
    let dir = tempfile::TempDir::new().unwrap();
    let bundles = fixture::write_corpus(dir.path()).unwrap();
    let providers = fixture::mock_provider_set_with_sidecars(DIM, dir.path()).unwrap();
    let index = build_index(
        &bundles,
        &providers,
        &WeightScheme::full(),
        &BuildConfig::default(),
    )
    .unwrap();
    let queries = fixture::queries();
    for (qid, target) in fixture::visual_targets() {
        let question = &queries.iter().find(|q| q.qid == qid).unwrap().question;
        let query_vec = providers.text.embed_text(question).unwrap();
        let hits = search(&index, &query_vec, 10).unwrap();
        let kept = deduplicate_diversify(&hits, &QueryParams::default());
        let ranked = rerank(
            &kept,
            question,
            providers.sentence.as_ref(),
            &WeightScheme::full(),
            TextMatchWeights::default(),
        )
        .unwrap();
        assert_eq!(
            ranked[0].record.record_id, target,
            "{qid} retrieved {} instead of {target}",
            ranked[0].record.record_id
        );
    }
}

#[test]
fn builds_are_deterministic_and_survive_persistence() {
    let dir = tempfile::TempDir::new().unwrap();
    let bundles = fixture::write_corpus(dir.path()).unwrap();
    let providers = fixture::mock_provider_set_with_sidecars(DIM, dir.path()).unwrap();
    let scheme = WeightScheme::text_image_caption();
    let config = BuildConfig::default();
    let a = build_index(&bundles, &providers, &scheme, &config).unwrap();
    let b = build_index(&bundles, &providers, &scheme, &config).unwrap();
    assert_eq!(a, b);

    let path = dir.path().join("out/caption.jsonl");
    persist_index(&a, &path).unwrap();
    let loaded = load_index(&path).unwrap();
    assert_eq!(a, loaded);
    assert_eq!(
        loaded.scheme().weight(Modality::Caption),
        WeightScheme::text_image_caption().weight(Modality::Caption)
    );

    // Byte-level determinism of the on-disk form.
    let path2 = dir.path().join("out/caption2.jsonl");
    persist_index(&b, &path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}
