//! SMOTE: synthetic minority oversampling by interpolating each minority
//! sample toward one of its k nearest minority neighbours.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::FeatureVector;
use crate::par::{self, Execution};

#[derive(Debug, Error, PartialEq)]
pub enum SmoteError {
    #[error("need at least k_neighbors + 1 = {needed} minority samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("minority vectors have mixed dimensions ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("k_neighbors must be at least 1")]
    ZeroNeighbors,
    #[error("target_ratio must be positive and finite, got {0}")]
    BadRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority size as a multiple of the majority size.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self { k_neighbors: 5, target_ratio: 1.0, seed: 0 }
    }
}

/// A synthetic sample together with the minority pair that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub vector: FeatureVector,
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

/// Number of synthetic samples needed: `ceil(ratio * majority) - minority`,
/// floored at zero.
pub fn synthetic_count(minority: usize, majority: usize, ratio: f64) -> usize {
    let target = (ratio * majority as f64).ceil() as usize;
    target.saturating_sub(minority)
}

/// The `k` nearest minority neighbours of every sample (Euclidean, self
/// excluded, ties broken by index).
pub fn nearest_neighbors(exec: Execution, points: &[FeatureVector], k: usize) -> Vec<Vec<usize>> {
    par::map_range(exec, points.len(), |i| {
        let x = points[i].as_slice();
        let mut d: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, z)| (squared_distance(x, z.as_slice()), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(k).map(|(_, j)| j).collect()
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Generates only the synthetic vectors; see [`smote_traced`].
pub fn smote_oversample(
    minority: &[FeatureVector],
    majority_count: usize,
    cfg: &SmoteConfig,
) -> Result<Vec<FeatureVector>, SmoteError> {
    Ok(smote_traced(Execution::default(), minority, majority_count, cfg)?
        .into_iter()
        .map(|s| s.vector)
        .collect())
}

/// Base samples are cycled round-robin in index order; the neighbour and
/// the interpolation gap `u ∈ [0, 1)` come from a ChaCha8 stream seeded with
/// `cfg.seed`, so the output depends only on the inputs and the seed.
pub fn smote_traced(
    exec: Execution,
    minority: &[FeatureVector],
    majority_count: usize,
    cfg: &SmoteConfig,
) -> Result<Vec<Synthetic>, SmoteError> {
    if cfg.k_neighbors == 0 {
        return Err(SmoteError::ZeroNeighbors);
    }
    if !(cfg.target_ratio.is_finite() && cfg.target_ratio > 0.0) {
        return Err(SmoteError::BadRatio(cfg.target_ratio));
    }
    if minority.len() < cfg.k_neighbors + 1 {
        return Err(SmoteError::TooFewSamples { needed: cfg.k_neighbors + 1, got: minority.len() });
    }
    let dim = minority[0].dim();
    if let Some(bad) = minority.iter().find(|v| v.dim() != dim) {
        return Err(SmoteError::DimMismatch(dim, bad.dim()));
    }

    let needed = synthetic_count(minority.len(), majority_count, cfg.target_ratio);
    if needed == 0 {
        return Ok(Vec::new());
    }

    let neighbors = nearest_neighbors(exec, minority, cfg.k_neighbors);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(needed);
    for n in 0..needed {
        let base = n % minority.len();
        let neighbor = neighbors[base][rng.random_range(0..cfg.k_neighbors)];
        let gap: f64 = rng.random();
        let x = minority[base].as_slice();
        let z = minority[neighbor].as_slice();
        let v = x
            .iter()
            .zip(z)
            // rounding can push x + u(z - x) a hair past the segment end
            .map(|(&a, &b)| (a + gap * (b - a)).clamp(a.min(b), a.max(b)))
            .collect();
        out.push(Synthetic { vector: FeatureVector::new(v), base, neighbor, gap });
    }
    Ok(out)
}
