//! Weight vectors for the linear metric combination.
//!
//! A [`WeightVector`] lives on the probability simplex: every entry in `[0, 1]`
//! and the entries sum to one. The genetic optimiser treats it as a ring (the
//! last gene is followed by the first); [`WeightVector::ring`] exposes that view.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight vector is empty")]
    Empty,
    #[error("weight {index} is {value}; weights must be finite and non-negative")]
    Negative { index: usize, value: f64 },
    #[error("all weights are zero")]
    AllZero,
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Normalises non-negative raw weights to sum to one.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self, WeightError> {
        if raw.is_empty() {
            return Err(WeightError::Empty);
        }
        if let Some((index, &value)) = raw
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(WeightError::Negative { index, value });
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(WeightError::AllZero);
        }
        Ok(Self(raw.into_iter().map(|w| w / sum).collect()))
    }

    /// Like [`from_raw`](Self::from_raw) but an all-zero vector becomes uniform.
    pub fn normalized_or_uniform(raw: Vec<f64>) -> Self {
        let n = raw.len();
        match Self::from_raw(raw) {
            Ok(w) => w,
            Err(_) => Self::uniform(n),
        }
    }

    /// Accepts weights that already lie on the simplex.
    pub fn from_normalized(weights: Vec<f64>) -> Result<Self, WeightError> {
        if weights.is_empty() {
            return Err(WeightError::Empty);
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0 || **w > 1.0 + SIMPLEX_TOLERANCE)
        {
            return Err(WeightError::Negative { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(WeightError::NotNormalized(sum));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weight vector needs at least one entry");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        assert!(index < n);
        let mut w = vec![0.0; n];
        w[index] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Iterates the genes starting at `start`, wrapping around once.
    pub fn ring(&self, start: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.0.len();
        (0..n).map(move |k| self.0[(start + k) % n])
    }

    pub fn is_on_simplex(&self) -> bool {
        let sum: f64 = self.0.iter().sum();
        (sum - 1.0).abs() <= SIMPLEX_TOLERANCE
            && self.0.iter().all(|w| (0.0..=1.0 + SIMPLEX_TOLERANCE).contains(w))
    }

    /// Linear combination with a feature row.
    pub fn dot(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.0.len());
        self.0.iter().zip(features).map(|(a, s)| a * s).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// L1 distance between two vectors of equal length.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}
