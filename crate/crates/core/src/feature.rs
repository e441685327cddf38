//! Fixed-dimension descriptor vectors.
//!
//! Motion histograms, static descriptors, and fused vectors all share one
//! dimension per run (1000 by default, following the codebook size when a
//! smaller codebook is in use). Components must be finite.

use crate::error::{Error, Result};

/// The default descriptor dimensionality.
pub const DEFAULT_DIM: usize = 1000;

/// A finite real vector used for motion, static, and fused descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec(Vec<f64>);

impl FeatureVec {
    /// Validates finiteness of every component.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite component at index {i} in descriptor vector"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Scales so components sum to one in absolute value; zero vectors are
    /// returned unchanged.
    pub fn l1_normalized(&self) -> Self {
        let norm: f64 = self.0.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            self.clone()
        } else {
            Self(self.0.iter().map(|v| v / norm).collect())
        }
    }
}

impl std::ops::Index<usize> for FeatureVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<FeatureVec> for Vec<f64> {
    fn from(v: FeatureVec) -> Self {
        v.0
    }
}

/// Mean of equally sized vectors. Errors on an empty set or mixed dimensions.
pub fn mean_vector(vectors: &[FeatureVec]) -> Result<FeatureVec> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Format("cannot average zero vectors".into()))?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(Error::Shape(format!(
                "vector dimension {} != {dim} while averaging",
                v.dim()
            )));
        }
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    FeatureVec::new(acc)
}
