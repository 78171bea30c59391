//! Belief over the number of meaning classes K, learned from training
//! prompts and conditioned on what the current sample has revealed.
//!
//! Observing k distinct meanings proves K >= k but never pins K down, so the
//! entropy belief is a mixture over the surviving K values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{atomic_write, PromptRecord};
use crate::estimators::{EntropyBelief, KComponent};
use crate::{Error, Result};

fn default_version() -> u32 {
    1
}

/// Discrete distribution over the support size K.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SupportPrior {
    /// Normalized weight per K. Empty means "no training information".
    pub weights: BTreeMap<usize, f64>,
    #[serde(default = "default_version")]
    pub version: u32,
}

impl SupportPrior {
    pub fn point_mass(k: usize) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(k, 1.0);
        SupportPrior { weights, version: 1 }
    }

    fn validate(mut self) -> Result<Self> {
        let mut total = 0.0;
        for (&k, &w) in &self.weights {
            if k == 0 {
                return Err(Error::domain("support size 0 is meaningless"));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::domain(format!(
                    "weight for K={k} must be finite and nonnegative, got {w}"
                )));
            }
            total += w;
        }
        if self.weights.is_empty() {
            return Ok(self);
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "support weights sum to {total}, expected 1"
            )));
        }
        for w in self.weights.values_mut() {
            *w /= total;
        }
        Ok(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let prior: SupportPrior = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        prior.validate()
    }
}

/// Relative frequencies of distinct-meaning counts across training prompts.
pub fn fit_support_prior(train: &[PromptRecord]) -> SupportPrior {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for r in train {
        *counts.entry(r.distinct_meanings()).or_insert(0.0) += 1.0;
    }
    let total: f64 = counts.values().sum();
    if total > 0.0 {
        for w in counts.values_mut() {
            *w /= total;
        }
    }
    SupportPrior {
        weights: counts,
        version: 1,
    }
}

/// Like `fit_support_prior` but adds `epsilon` pseudo-count to every K from 1
/// through the largest observed count, so unseen sizes keep a little mass.
pub fn fit_support_prior_smoothed(train: &[PromptRecord], epsilon: f64) -> Result<SupportPrior> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::domain(format!(
            "smoothing epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut max_k = 0;
    for r in train {
        let k = r.distinct_meanings();
        max_k = max_k.max(k);
        *counts.entry(k).or_insert(0.0) += 1.0;
    }
    if epsilon > 0.0 {
        for k in 1..=max_k {
            *counts.entry(k).or_insert(0.0) += epsilon;
        }
    }
    let total: f64 = counts.values().sum();
    if total > 0.0 {
        for w in counts.values_mut() {
            *w /= total;
        }
    }
    Ok(SupportPrior {
        weights: counts,
        version: 1,
    })
}

/// Conditions the prior on the evidence "K >= k_min" (or "K > k_min" when
/// `strict`). When nothing survives, falls back to a point mass at the
/// observed count: it is the only value the data itself guarantees.
pub fn condition_support(prior: &SupportPrior, k_min: usize, strict: bool) -> Result<SupportPrior> {
    if k_min == 0 {
        return Err(Error::domain("k_min must be at least 1"));
    }
    let keep = |k: usize| if strict { k > k_min } else { k >= k_min };
    let surviving: BTreeMap<usize, f64> = prior
        .weights
        .iter()
        .filter(|&(&k, &w)| keep(k) && w > 0.0)
        .map(|(&k, &w)| (k, w))
        .collect();
    let total: f64 = surviving.values().sum();
    if total <= 0.0 {
        return Ok(SupportPrior::point_mass(k_min));
    }
    let weights = surviving.into_iter().map(|(k, w)| (k, w / total)).collect();
    Ok(SupportPrior {
        weights,
        version: 1,
    })
}

/// Mixes per-K entropy moments under the conditioned support belief using
/// the laws of total expectation and total variance.
///
/// `moments` holds (K, mean, variance) and must cover exactly the support of
/// `cond`. The returned belief's `n_used` is 0; the caller owns that field.
pub fn aggregate_over_support(
    cond: &SupportPrior,
    moments: &[(usize, f64, f64)],
) -> Result<EntropyBelief> {
    if cond.weights.is_empty() {
        return Err(Error::domain("cannot aggregate over an empty support belief"));
    }
    let by_k: BTreeMap<usize, (f64, f64)> =
        moments.iter().map(|&(k, m, v)| (k, (m, v))).collect();
    if by_k.len() != moments.len() {
        return Err(Error::domain("duplicate K in per-support moments"));
    }
    if by_k.len() != cond.weights.len()
        || !cond.weights.keys().all(|k| by_k.contains_key(k))
    {
        return Err(Error::domain(
            "per-support moments must cover exactly the conditioned support",
        ));
    }
    let mut per_k = Vec::with_capacity(by_k.len());
    let mut mean = 0.0;
    for (&k, &w) in &cond.weights {
        let (m, v) = by_k[&k];
        if !m.is_finite() || !v.is_finite() || v < 0.0 {
            return Err(Error::domain(format!(
                "moments for K={k} must be finite with nonnegative variance"
            )));
        }
        mean += w * m;
        per_k.push(KComponent {
            k,
            weight: w,
            mean: m,
            variance: v,
        });
    }
    let mut variance = 0.0;
    for c in &per_k {
        variance += c.weight * (c.variance + (c.mean - mean) * (c.mean - mean));
    }
    Ok(EntropyBelief {
        mean,
        variance: variance.max(0.0),
        n_used: 0,
        per_k,
    })
}
