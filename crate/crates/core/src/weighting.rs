//! Softmax similarity weights over a (possibly pruned) source pool.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::LanguageId;
use crate::typology::{DistanceKind, DistanceSource, DistanceVector, FeatureCategory};

/// Restriction applied to the source pool before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PruningPolicy {
    #[default]
    None,
    /// Keep the `k` nearest sources.
    TopK { k: usize },
    /// Keep sources whose similarity `1 - normalized distance` is strictly above `tau`.
    SimilarityThreshold { tau: f64 },
}

impl PruningPolicy {
    pub fn top_k(k: usize) -> Result<Self> {
        let policy = PruningPolicy::TopK { k };
        policy.validate()?;
        Ok(policy)
    }

    pub fn threshold(tau: f64) -> Result<Self> {
        let policy = PruningPolicy::SimilarityThreshold { tau };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PruningPolicy::None => Ok(()),
            PruningPolicy::TopK { k } if k >= 1 => Ok(()),
            PruningPolicy::TopK { .. } => Err(Error::InvalidPolicy("top-k needs k >= 1".to_string())),
            PruningPolicy::SimilarityThreshold { tau } if (0.0..=1.0).contains(&tau) => Ok(()),
            PruningPolicy::SimilarityThreshold { tau } => Err(Error::InvalidPolicy(alloc::format!(
                "threshold {tau} outside [0, 1]"
            ))),
        }
    }
}

impl fmt::Display for PruningPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruningPolicy::None => f.write_str("none"),
            PruningPolicy::TopK { k } => write!(f, "top-k={k}"),
            PruningPolicy::SimilarityThreshold { tau } => write!(f, "threshold={tau}"),
        }
    }
}

/// Per-source merge coefficients: positive, summing to 1, keyed lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub target: LanguageId,
    pub weights: BTreeMap<LanguageId, f64>,
    pub policy: PruningPolicy,
    pub kind: DistanceKind,
}

impl SimilarityWeights {
    pub fn get(&self, lang: &LanguageId) -> Option<f64> {
        self.weights.get(lang).copied()
    }

    /// Sources by descending weight, ties broken lexicographically.
    pub fn ranked(&self) -> Vec<(&LanguageId, f64)> {
        let mut ranked: Vec<_> = self.weights.iter().map(|(l, w)| (l, *w)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }
}

/// `exp(1 - d_i) / sum_j exp(1 - d_j)` for each distance.
///
/// Evaluated as `exp(d_min - d_i)` before normalizing, which is the same
/// quantity with every exponent `<= 0`.
pub fn softmax_similarity(distances: &[f64]) -> Vec<f64> {
    let Some(d_min) = distances.iter().copied().min_by(f64::total_cmp) else {
        return Vec::new();
    };
    let scores: Vec<f64> = distances.iter().map(|d| libm::exp(d_min - d)).collect();
    let total: f64 = scores.iter().sum();
    scores.into_iter().map(|s| s / total).collect()
}

/// Softmax weights from the normalized distances in `dv`.
pub fn similarity_weights(dv: &DistanceVector) -> Result<SimilarityWeights> {
    if dv.is_empty() {
        return Err(Error::EmptyPool);
    }
    let distances: Vec<f64> = dv.entries().values().map(|e| e.normalized).collect();
    let weights = dv
        .languages()
        .cloned()
        .zip(softmax_similarity(&distances))
        .collect();
    Ok(SimilarityWeights {
        target: dv.target.clone(),
        weights,
        policy: PruningPolicy::None,
        kind: dv.kind,
    })
}

/// Drop sources according to `policy`. Normalized distances are not recomputed.
pub fn apply_pruning(dv: &DistanceVector, policy: PruningPolicy) -> Result<DistanceVector> {
    policy.validate()?;
    if dv.is_empty() {
        return Err(Error::EmptyPool);
    }
    let pruned = match policy {
        PruningPolicy::None => dv.clone(),
        PruningPolicy::TopK { k } => {
            let mut order: Vec<_> = dv.entries().iter().collect();
            order.sort_by(|a, b| match a.1.normalized.total_cmp(&b.1.normalized) {
                Ordering::Equal => a.0.cmp(b.0),
                other => other,
            });
            let kept: Vec<LanguageId> = order.into_iter().take(k).map(|(l, _)| l.clone()).collect();
            dv.retain(|l, _| kept.contains(l))
        }
        PruningPolicy::SimilarityThreshold { tau } => dv.retain(|_, e| e.similarity() > tau),
    };
    if pruned.is_empty() {
        return Err(Error::AllPruned);
    }
    Ok(pruned)
}

/// Distances, pruning and softmax in one step.
pub fn proxy_weights<'p>(
    target: &LanguageId,
    pool: impl IntoIterator<Item = &'p LanguageId>,
    source: &DistanceSource<'_>,
    category: FeatureCategory,
    policy: PruningPolicy,
) -> Result<SimilarityWeights> {
    policy.validate()?;
    let dv = source.distance_vector(target, pool, category)?;
    let pruned = apply_pruning(&dv, policy)?;
    let mut weights = similarity_weights(&pruned)?;
    weights.policy = policy;
    Ok(weights)
}
