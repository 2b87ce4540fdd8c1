//! Embedding vectors and cosine similarity.
//!
//! Values are stored as `f32` (the on-disk precision); dot products and norms
//! accumulate in `f64`.

use serde::{Deserialize, Serialize};

use super::StoreError;

/// A fixed-dimension embedding with its Euclidean norm cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm: f64,
}

impl EmbeddingVector {
    /// Builds a vector, rejecting empty input and non-finite values.
    ///
    /// Zero vectors are representable; they fail at similarity time with
    /// [`StoreError::DegenerateEmbedding`].
    pub fn new(values: Vec<f32>) -> Result<Self, StoreError> {
        if values.is_empty() {
            return Err(StoreError::EmptyVector);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite { index: pos });
        }
        let norm = l2_norm(&values);
        Ok(Self { values, norm })
    }

    /// Returns a unit-length copy. Fails on the zero vector.
    pub fn normalized(&self) -> Result<Self, StoreError> {
        if self.norm == 0.0 {
            return Err(StoreError::DegenerateEmbedding);
        }
        let values = self.values.iter().map(|&v| (v as f64 / self.norm) as f32).collect();
        Self::new(values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = StoreError;

    fn try_from(values: Vec<f32>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.values
    }
}

pub(crate) fn l2_norm(values: &[f32]) -> f64 {
    values
        .iter()
        .map(|&v| {
            let v = v as f64;
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Cosine from raw rows with precomputed norms. Callers guarantee non-zero norms.
#[inline]
pub(crate) fn cosine_raw(a: &[f32], a_norm: f64, b: &[f32], b_norm: f64) -> f64 {
    (dot(a, b) / (a_norm * b_norm)).clamp(-1.0, 1.0)
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
///
/// Exactly symmetric: the products commute and are summed in index order.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, StoreError> {
    if a.dim() != b.dim() {
        return Err(StoreError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Err(StoreError::DegenerateEmbedding);
    }
    Ok(cosine_raw(&a.values, a.norm, &b.values, b.norm))
}

/// A dense row-major table of equal-dimension vectors, as read from a vector file.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f64>,
}

impl VectorTable {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::EmptyVector);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(StoreError::Truncated {
                expected: data.len().div_ceil(dim) * dim,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite { index: pos });
        }
        let norms = data.chunks_exact(dim).map(l2_norm).collect();
        Ok(Self { dim, data, norms })
    }

    pub fn from_vectors(dim: usize, vectors: &[EmbeddingVector]) -> Result<Self, StoreError> {
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.dim() != dim {
                return Err(StoreError::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            data.extend_from_slice(v.values());
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn vector(&self, i: usize) -> EmbeddingVector {
        EmbeddingVector {
            values: self.row(i).to_vec(),
            norm: self.norms[i],
        }
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    /// Index of the first zero-norm row, if any.
    pub fn first_degenerate_row(&self) -> Option<usize> {
        self.norms.iter().position(|&n| n == 0.0)
    }
}
