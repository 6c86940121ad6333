//! Weighted fusion of per-modality embeddings into one retrieval vector.
//!
//! A `WeightScheme` assigns one weight per modality. Fusion takes the
//! weighted sum of whatever modality vectors are present and L2-normalizes
//! the result. Weights of absent modalities are never redistributed; the
//! remaining directions just carry less of the total mass, which keeps
//! scheme comparisons honest.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingVector};

/// Weight sums may drift from 1.0 by at most this much.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("modality {0} required by the scheme is missing")]
    MissingModality(Modality),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// The four signal channels an image record can carry. The declaration
/// order is the canonical processing order everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Caption,
    Ocr,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Text,
        Modality::Image,
        Modality::Caption,
        Modality::Ocr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::Caption => "caption",
            Modality::Ocr => "ocr",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named, validated weight assignment over the four modalities. Weights
/// are non-negative and sum to 1 within `WEIGHT_SUM_TOLERANCE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightSchemeRepr", into = "WeightSchemeRepr")]
pub struct WeightScheme {
    name: String,
    weights: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct WeightSchemeRepr {
    name: String,
    weights: [f64; 4],
}

impl From<WeightScheme> for WeightSchemeRepr {
    fn from(s: WeightScheme) -> Self {
        WeightSchemeRepr {
            name: s.name,
            weights: s.weights,
        }
    }
}

impl TryFrom<WeightSchemeRepr> for WeightScheme {
    type Error = FusionError;

    fn try_from(repr: WeightSchemeRepr) -> Result<Self, Self::Error> {
        WeightScheme::new(repr.name, repr.weights)
    }
}

impl WeightScheme {
    pub fn new(name: impl Into<String>, weights: [f64; 4]) -> Result<Self, FusionError> {
        let name = name.into();
        if name.is_empty() {
            return Err(FusionError::InvalidWeights("scheme name is empty".into()));
        }
        for (m, w) in Modality::ALL.iter().zip(weights) {
            if !w.is_finite() || w < 0.0 {
                return Err(FusionError::InvalidWeights(format!(
                    "weight for {m} is {w}, must be finite and non-negative"
                )));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(FusionError::InvalidWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(WeightScheme { name, weights })
    }

    pub fn text_only() -> Self {
        WeightScheme::new("text_only", [1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    pub fn text_image() -> Self {
        WeightScheme::new("text_image", [0.55, 0.45, 0.0, 0.0]).unwrap()
    }

    pub fn text_image_caption() -> Self {
        WeightScheme::new("text_image_caption", [0.35, 0.20, 0.45, 0.0]).unwrap()
    }

    pub fn full() -> Self {
        WeightScheme::new("full", [0.30, 0.15, 0.25, 0.30]).unwrap()
    }

    pub fn algorithm_fusion() -> Self {
        WeightScheme::new("algorithm_fusion", [0.30, 0.15, 0.35, 0.20]).unwrap()
    }

    pub fn presets() -> Vec<WeightScheme> {
        vec![
            WeightScheme::text_only(),
            WeightScheme::text_image(),
            WeightScheme::text_image_caption(),
            WeightScheme::full(),
            WeightScheme::algorithm_fusion(),
        ]
    }

    pub fn by_name(name: &str) -> Option<WeightScheme> {
        WeightScheme::presets().into_iter().find(|s| s.name == name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn weight(&self, modality: Modality) -> f64 {
        self.weights[modality as usize]
    }

    /// Modalities with a strictly positive weight, in canonical order.
    pub fn active_modalities(&self) -> Vec<Modality> {
        Modality::ALL
            .iter()
            .copied()
            .filter(|m| self.weight(*m) > 0.0)
            .collect()
    }
}

/// Componentwise weighted sum, without normalization. All vectors must
/// share one dimension; the result reports `normalized` honestly.
pub fn weighted_sum(parts: &[(f64, &EmbeddingVector)]) -> Result<EmbeddingVector, FusionError> {
    let dim = match parts.first() {
        Some((_, v)) => v.dim(),
        None => return Err(FusionError::InvalidWeights("no vectors to sum".into())),
    };
    let mut acc = vec![0.0; dim];
    for (w, v) in parts {
        if v.dim() != dim {
            return Err(FusionError::DimMismatch {
                expected: dim,
                actual: v.dim(),
            });
        }
        for (a, x) in acc.iter_mut().zip(v.values()) {
            *a += w * x;
        }
    }
    Ok(EmbeddingVector::raw(acc)?)
}

/// Fuse the available modality vectors under `scheme`.
///
/// Modalities with zero weight are ignored. A weighted modality missing
/// from `per_modality` is an error in strict mode and is skipped otherwise;
/// its weight is not handed to the survivors. A sum of zero (nothing
/// present, or only zero vectors) yields the zero vector with
/// `normalized == false` so callers can tell it apart from a real
/// direction.
pub fn combine_embeddings(
    per_modality: &BTreeMap<Modality, EmbeddingVector>,
    scheme: &WeightScheme,
    strict: bool,
) -> Result<EmbeddingVector, FusionError> {
    let mut parts: Vec<(f64, &EmbeddingVector)> = Vec::new();
    for m in scheme.active_modalities() {
        match per_modality.get(&m) {
            Some(v) => parts.push((scheme.weight(m), v)),
            None if strict => return Err(FusionError::MissingModality(m)),
            None => {}
        }
    }
    if parts.is_empty() {
        // No weighted modality made it in; the dimension can only come from
        // whatever vectors the caller does have.
        return match per_modality.values().next() {
            Some(v) => Ok(EmbeddingVector::zero(v.dim())),
            None => Err(FusionError::MissingModality(
                scheme
                    .active_modalities()
                    .first()
                    .copied()
                    .unwrap_or(Modality::Text),
            )),
        };
    }
    let sum = weighted_sum(&parts)?;
    if sum.is_zero() {
        return Ok(sum);
    }
    Ok(EmbeddingVector::normalized_from(sum.values().to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec_of(values: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector::raw(values).unwrap()
    }

    #[test]
    fn presets_are_valid_and_sum_to_one() {
        let presets = WeightScheme::presets();
        assert_eq!(presets.len(), 5);
        for s in &presets {
            let sum: f64 = s.weights().iter().sum();
            assert!(
                (sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE,
                "{} sums to {sum}",
                s.name()
            );
        }
        assert_eq!(WeightScheme::text_only().weights(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(WeightScheme::text_image().weights(), [0.55, 0.45, 0.0, 0.0]);
        assert_eq!(
            WeightScheme::text_image_caption().weights(),
            [0.35, 0.20, 0.45, 0.0]
        );
        assert_eq!(WeightScheme::full().weights(), [0.30, 0.15, 0.25, 0.30]);
        assert_eq!(
            WeightScheme::algorithm_fusion().weights(),
            [0.30, 0.15, 0.35, 0.20]
        );
    }

    #[test]
    fn by_name_finds_presets() {
        assert_eq!(WeightScheme::by_name("full"), Some(WeightScheme::full()));
        assert_eq!(WeightScheme::by_name("nope"), None);
    }

    #[test]
    fn bad_weights_are_rejected() {
        assert!(WeightScheme::new("s", [0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(WeightScheme::new("s", [-0.1, 1.1, 0.0, 0.0]).is_err());
        assert!(WeightScheme::new("s", [f64::NAN, 1.0, 0.0, 0.0]).is_err());
        assert!(WeightScheme::new("", [1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn scheme_serde_validates_on_the_way_in() {
        let json = serde_json::to_string(&WeightScheme::full()).unwrap();
        let back: WeightScheme = serde_json::from_str(&json).unwrap();
        assert_eq!(back, WeightScheme::full());
        let bad = r#"{"name":"x","weights":[0.9,0.9,0.0,0.0]}"#;
        assert!(serde_json::from_str::<WeightScheme>(bad).is_err());
    }

    #[test]
    fn two_modality_fusion_matches_hand_computation() {
        // normalize(0.55 * e1 + 0.45 * e2)
        let mut per = BTreeMap::new();
        per.insert(Modality::Text, vec_of(vec![1.0, 0.0]));
        per.insert(Modality::Image, vec_of(vec![0.0, 1.0]));
        let out = combine_embeddings(&per, &WeightScheme::text_image(), true).unwrap();
        assert!((out.values()[0] - 0.773957).abs() < 1e-6, "{:?}", out.values());
        assert!((out.values()[1] - 0.633238).abs() < 1e-6);
        assert!(out.is_normalized());
    }

    #[test]
    fn single_modality_axis_vector_passes_through_exactly() {
        let mut per = BTreeMap::new();
        per.insert(Modality::Text, vec_of(vec![1.0, 0.0, 0.0]));
        let out = combine_embeddings(&per, &WeightScheme::text_only(), true).unwrap();
        assert_eq!(out.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn weighted_sum_does_not_redistribute_missing_weight() {
        // full weights text 0.30 and image 0.15; with caption and ocr gone
        // the raw sum keeps those magnitudes instead of rescaling to 1.
        let t = vec_of(vec![1.0, 0.0]);
        let i = vec_of(vec![0.0, 1.0]);
        let sum = weighted_sum(&[(0.30, &t), (0.15, &i)]).unwrap();
        assert_eq!(sum.values(), &[0.30, 0.15]);
    }

    #[test]
    fn missing_modality_skipped_when_not_strict() {
        let mut per = BTreeMap::new();
        per.insert(Modality::Text, vec_of(vec![3.0, 4.0]));
        let out = combine_embeddings(&per, &WeightScheme::full(), false).unwrap();
        assert!((out.values()[0] - 0.6).abs() < 1e-12);
        assert!((out.values()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn missing_modality_errors_when_strict() {
        let mut per = BTreeMap::new();
        per.insert(Modality::Text, vec_of(vec![1.0, 0.0]));
        per.insert(Modality::Image, vec_of(vec![0.0, 1.0]));
        per.insert(Modality::Caption, vec_of(vec![1.0, 1.0]));
        let err = combine_embeddings(&per, &WeightScheme::full(), true).unwrap_err();
        assert!(matches!(err, FusionError::MissingModality(Modality::Ocr)));
    }

    #[test]
    fn zero_sum_yields_unnormalized_zero() {
        let mut per = BTreeMap::new();
        per.insert(Modality::Text, EmbeddingVector::zero(4));
        per.insert(Modality::Image, EmbeddingVector::zero(4));
        let out = combine_embeddings(&per, &WeightScheme::text_image(), true).unwrap();
        assert!(out.is_zero());
        assert!(!out.is_normalized());
    }

    #[test]
    fn dim_mismatch_is_reported() {
        let mut per = BTreeMap::new();
        per.insert(Modality::Text, vec_of(vec![1.0, 0.0]));
        per.insert(Modality::Image, vec_of(vec![1.0, 0.0, 0.0]));
        let err = combine_embeddings(&per, &WeightScheme::text_image(), true).unwrap_err();
        assert!(matches!(err, FusionError::DimMismatch { expected: 2, actual: 3 }));
    }

    proptest! {
        #[test]
        fn weighted_sum_is_linear(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            wa in 0.0f64..1.0,
            wb in 0.0f64..1.0,
        ) {
            let va = vec_of(a.clone());
            let vb = vec_of(b.clone());
            let sum = weighted_sum(&[(wa, &va), (wb, &vb)]).unwrap();
            for k in 0..4 {
                let expect = wa * a[k] + wb * b[k];
                prop_assert!((sum.values()[k] - expect).abs() < 1e-12);
            }
        }

        #[test]
        fn combined_vector_is_unit_or_zero(
            t in proptest::collection::vec(-5.0f64..5.0, 8),
            i in proptest::collection::vec(-5.0f64..5.0, 8),
        ) {
            let mut per = BTreeMap::new();
            per.insert(Modality::Text, vec_of(t));
            per.insert(Modality::Image, vec_of(i));
            let out = combine_embeddings(&per, &WeightScheme::text_image(), true).unwrap();
            if out.is_zero() {
                prop_assert!(!out.is_normalized());
            } else {
                prop_assert!((out.l2_norm() - 1.0).abs() <= 1e-9);
                prop_assert!(out.is_normalized());
            }
        }
    }
}
