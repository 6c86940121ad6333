//! Dense embedding vectors and the cosine math shared by every stage of the
//! pipeline. Vectors are plain `f64` slices; anything produced by a provider
//! or the fusion step is expected to be L2-normalized unless it is the zero
//! vector (empty inputs embed to zero).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How far an L2 norm may drift from 1.0 before a vector no longer counts as
/// normalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("embedding value at position {index} is not finite")]
    NonFinite { index: usize },
    #[error("normalized flag is inconsistent with the actual norm {norm}")]
    BadNormFlag { norm: f64 },
}

/// A fixed-dimension embedding. `normalized` records whether the values were
/// L2-normalized; the zero vector (produced by empty inputs) is the one case
/// where it stays false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    normalized: bool,
}

impl EmbeddingVector {
    /// The zero vector of the given dimension, flagged as unnormalized.
    pub fn zero(dim: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dim],
            normalized: false,
        }
    }

    /// Build a vector by L2-normalizing `values`. An all-zero input stays the
    /// zero vector with `normalized = false`.
    pub fn normalized_from(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        check_finite(&values)?;
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Ok(EmbeddingVector {
                values,
                normalized: false,
            });
        }
        let values = values.into_iter().map(|v| v / norm).collect();
        Ok(EmbeddingVector {
            values,
            normalized: true,
        })
    }

    /// Carry raw values without normalizing. The flag is derived from the
    /// actual norm so callers cannot smuggle in an inconsistent state.
    pub fn raw(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        check_finite(&values)?;
        let norm = l2_norm(&values);
        Ok(EmbeddingVector {
            values,
            normalized: (norm - 1.0).abs() <= NORM_TOLERANCE,
        })
    }

    /// Rebuild from serialized parts, validating that the stored flag matches
    /// the stored values. Used when loading persisted indexes.
    pub fn from_parts(values: Vec<f64>, normalized: bool) -> Result<Self, EmbeddingError> {
        check_finite(&values)?;
        let norm = l2_norm(&values);
        let consistent = if normalized {
            (norm - 1.0).abs() <= NORM_TOLERANCE
        } else {
            // An unnormalized vector is anything whose norm we never forced
            // to 1; zero is the common case but scaled queries also qualify.
            true
        };
        if !consistent {
            return Err(EmbeddingError::BadNormFlag { norm });
        }
        Ok(EmbeddingVector { values, normalized })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// Multiply every component by `c`. The normalized flag is recomputed
    /// from the resulting norm.
    pub fn scale(&self, c: f64) -> Result<Self, EmbeddingError> {
        let values: Vec<f64> = self.values.iter().map(|v| v * c).collect();
        EmbeddingVector::raw(values)
    }

    /// Validate the stored flag against the stored values, for vectors that
    /// arrived through serde without going through `from_parts`.
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        check_finite(&self.values)?;
        if self.normalized {
            let norm = l2_norm(&self.values);
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(EmbeddingError::BadNormFlag { norm });
            }
        }
        Ok(())
    }
}

fn check_finite(values: &[f64]) -> Result<(), EmbeddingError> {
    for (index, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(EmbeddingError::NonFinite { index });
        }
    }
    Ok(())
}

pub fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity. Returns 0.0 when either vector is zero, so callers do
/// not have to special-case empty-input embeddings.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let na = a.l2_norm();
    let nb = b.l2_norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot(a.values(), b.values()) / (na * nb))
}
