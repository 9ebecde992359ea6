//! Hashed bag-of-n-grams featurizer.
//!
//! Sentences are tokenized into maximal alphanumeric runs, the word n-grams
//! are hashed with seedless 64-bit FNV-1a, and counts are accumulated modulo
//! a power-of-two dimension. No vocabulary is fitted, so featurization is a
//! pure function of the text and the config, stable across runs and
//! platforms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Byte inserted between the tokens of an n-gram before hashing, so that
/// `["ab", "c"]` and `["a", "bc"]` hash differently.
const NGRAM_SEPARATOR: u8 = 0x1f;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("invalid featurizer config: {0}")]
    InvalidConfig(String),
}

/// Configuration of the hashing featurizer.
///
/// `dim` must be a power of two in `[2^10, 2^24]`; n-gram orders are limited
/// to `1 ..= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub dim: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub lowercase: bool,
    pub normalize: bool,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            dim: 1 << 18,
            ngram_min: 1,
            ngram_max: 2,
            lowercase: true,
            normalize: true,
        }
    }
}

impl FeaturizerConfig {
    pub const MIN_DIM: usize = 1 << 10;
    pub const MAX_DIM: usize = 1 << 24;

    pub fn validate(&self) -> Result<(), FeatureError> {
        if !self.dim.is_power_of_two() || self.dim < Self::MIN_DIM || self.dim > Self::MAX_DIM {
            return Err(FeatureError::InvalidConfig(format!(
                "dim must be a power of two in [2^10, 2^24], got {}",
                self.dim
            )));
        }
        if self.ngram_min < 1 || self.ngram_min > self.ngram_max || self.ngram_max > 3 {
            return Err(FeatureError::InvalidConfig(format!(
                "need 1 <= ngram_min <= ngram_max <= 3, got {}..={}",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }
}

/// Sparse feature vector with strictly increasing indices and positive values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    /// The all-zero vector.
    pub fn empty(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of non-zero entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Non-zero entries as `(index, value)` pairs, in increasing index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sum of all values (total n-gram mass before normalization).
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Seedless 64-bit FNV-1a.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the n-gram's tokens joined with the unit separator, without
/// materializing the joined string.
fn hash_ngram(tokens: &[String]) -> u64 {
    let mut hash = FNV_OFFSET;
    for (i, token) in tokens.iter().enumerate() {
        if i > 0 {
            hash ^= u64::from(NGRAM_SEPARATOR);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
        for &b in token.as_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

/// Splits text into maximal runs of alphanumeric characters, lowercased when
/// the config says so. The empty input yields an empty list.
pub fn tokenize(text: &str, cfg: &FeaturizerConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if cfg.lowercase {
                current.extend(ch.to_lowercase());
            } else {
                current.push(ch);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Maps text to its hashed n-gram count vector.
///
/// Counts all n-grams for `n` in `[ngram_min, ngram_max]`; hash collisions
/// accumulate into the same bucket. With `normalize` set, the result is
/// scaled to unit Euclidean norm (the all-zero vector stays zero).
pub fn featurize(text: &str, cfg: &FeaturizerConfig) -> SparseVector {
    debug_assert!(cfg.validate().is_ok());
    let tokens = tokenize(text, cfg);
    let mut counts = std::collections::BTreeMap::new();
    for n in cfg.ngram_min..=cfg.ngram_max {
        if n > tokens.len() {
            break;
        }
        for window in tokens.windows(n) {
            let index = (hash_ngram(window) % cfg.dim as u64) as u32;
            *counts.entry(index).or_insert(0.0) += 1.0;
        }
    }
    let mut vector = SparseVector {
        indices: counts.keys().copied().collect(),
        values: counts.values().copied().collect(),
        dim: cfg.dim,
    };
    if cfg.normalize && !vector.is_empty() {
        let norm = vector.l2_norm();
        for value in &mut vector.values {
            *value /= norm;
        }
    }
    vector
}
