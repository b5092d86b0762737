//! Finite probability tables over `A^S` and the entropy helpers shared by the
//! exact and tree engines. Entropies are in nats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("table has {got} entries, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("probabilities must be finite and non-negative with positive total")]
    Invalid,
    #[error("distributions live on different spaces ({0} vs {1})")]
    ShapeMismatch(String, String),
}

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}

/// A probability vector over `A^S`, the first site being the most significant
/// digit of the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    alphabet: usize,
    sites: usize,
    probs: Vec<f64>,
}

impl Distribution {
    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(
        alphabet: usize,
        sites: usize,
        weights: Vec<f64>,
    ) -> Result<Self, DistributionError> {
        let expected = alphabet.pow(sites as u32);
        if weights.len() != expected {
            return Err(DistributionError::Length {
                got: weights.len(),
                expected,
            });
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !(total > 0.0) {
            return Err(DistributionError::Invalid);
        }
        Ok(Distribution {
            alphabet,
            sites,
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(alphabet: usize, sites: usize) -> Self {
        let len = alphabet.pow(sites as u32);
        Distribution {
            alphabet,
            sites,
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn point_mass(alphabet: usize, sites: usize, index: usize) -> Self {
        let mut probs = vec![0.0; alphabet.pow(sites as u32)];
        probs[index] = 1.0;
        Distribution {
            alphabet,
            sites,
            probs,
        }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }

    /// Total-variation distance `½ Σ |p - q|`.
    pub fn tv_distance(&self, other: &Distribution) -> Result<f64, DistributionError> {
        if self.alphabet != other.alphabet || self.sites != other.sites {
            return Err(DistributionError::ShapeMismatch(
                format!("{}^{}", self.alphabet, self.sites),
                format!("{}^{}", other.alphabet, other.sites),
            ));
        }
        let l1: f64 = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok((0.5 * l1).min(1.0))
    }

    /// Marginal law of site `j`.
    pub fn site_marginal(&self, j: usize) -> Distribution {
        let q = self.alphabet;
        let stride = q.pow((self.sites - 1 - j) as u32);
        let mut out = vec![0.0; q];
        for (idx, p) in self.probs.iter().enumerate() {
            out[(idx / stride) % q] += p;
        }
        Distribution {
            alphabet: q,
            sites: 1,
            probs: out,
        }
    }

    /// Marginal on the first `m` sites (a prefix of the site order).
    pub fn prefix_marginal(&self, m: usize) -> Distribution {
        let q = self.alphabet;
        let block = q.pow((self.sites - m) as u32);
        let probs = self
            .probs
            .chunks(block)
            .map(|c| c.iter().sum())
            .collect();
        Distribution {
            alphabet: q,
            sites: m,
            probs,
        }
    }
}
