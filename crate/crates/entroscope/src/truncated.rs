//! Moments of Shannon entropy under a Dirichlet restricted to a lower-bounded
//! region of the simplex, via self-normalized importance sampling.
//!
//! Observed sequence probabilities put floors under meaning-class masses:
//! class j must carry at least the total probability of the distinct texts
//! seen for it. The posterior then lives on {b : b_j >= l_j}, which is an
//! affine image of the full simplex, so uniform proposals on it are cheap and
//! the Dirichlet density (up to a constant) supplies the importance weights.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::data::SampleRecord;
use crate::shannon_entropy;
use crate::{Error, Result};

/// Per-meaning lower bounds derived from observed sequence probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub bounds: Vec<f64>,
    /// True when float overshoot past total mass 1 forced a rescale.
    pub clamped: bool,
}

/// Sums distinct-text probabilities per meaning class into lower bounds.
///
/// Duplicate texts contribute once: they are repeat observations of one
/// sequence, not additional probability mass.
pub fn build_constraints(records: &[SampleRecord], k: usize) -> Result<Constraints> {
    if k == 0 {
        return Err(Error::domain("need at least one meaning class"));
    }
    let mut bounds = vec![0.0; k];
    let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for r in records {
        let j = r.meaning as usize;
        if j >= k {
            return Err(Error::domain(format!(
                "meaning label {j} out of range for {k} classes"
            )));
        }
        if seen.insert(&r.text) {
            bounds[j] += r.log_prob.exp();
        }
    }
    let total: f64 = bounds.iter().sum();
    let mut clamped = false;
    if total > 1.0 + 1e-6 {
        return Err(Error::domain(format!(
            "observed probability mass {total:.8} exceeds 1 beyond float tolerance"
        )));
    }
    if total > 1.0 {
        // Overshoot is rounding noise; pull just inside the simplex so the
        // truncated region stays nonempty.
        let scale = (1.0 - 1e-9) / total;
        for b in &mut bounds {
            *b *= scale;
        }
        clamped = true;
        log::warn!(
            "observed mass {total:.12} overshoots 1 by float noise; bounds rescaled"
        );
    }
    Ok(Constraints { bounds, clamped })
}

fn validate_bounds(bounds: &[f64]) -> Result<f64> {
    if bounds.is_empty() {
        return Err(Error::domain("bounds must be non-empty"));
    }
    for &l in bounds {
        if !l.is_finite() || !(0.0..=1.0).contains(&l) {
            return Err(Error::domain(format!(
                "each lower bound must lie in [0, 1], got {l}"
            )));
        }
    }
    let total: f64 = bounds.iter().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::domain(format!(
            "lower bounds sum to {total:.12}, leaving no feasible region"
        )));
    }
    Ok(total)
}

/// Draws `m` points uniformly from {b in simplex : b_j >= bounds_j}.
///
/// A uniform draw u on the full simplex maps to bounds + (1 - sum(bounds)) u,
/// which is uniform on the truncated region. When the bounds already sum to
/// one the region is a single point and every draw equals it.
pub fn sample_truncated_uniform(bounds: &[f64], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let covered = validate_bounds(bounds)?;
    if m == 0 {
        return Err(Error::domain("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = (1.0 - covered).max(0.0);
    let k = bounds.len();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = e.iter().sum();
        if total <= 0.0 {
            // All exponentials underflowed to zero; any point is as uniform
            // as another, so take the barycenter.
            e = vec![1.0 / k as f64; k];
        } else {
            for v in &mut e {
                *v /= total;
            }
        }
        let b: Vec<f64> = bounds.iter().zip(&e).map(|(&l, &u)| l + slack * u).collect();
        out.push(b);
    }
    Ok(out)
}

/// Posterior summary of entropy over the truncated region.
#[derive(Debug, Clone)]
pub struct TruncatedMoments {
    pub mean: f64,
    pub variance: f64,
    /// Effective sample size of the importance-weighted draws, in [1, m].
    pub ess: f64,
    /// Linearized Monte Carlo standard error of `mean`.
    pub mean_standard_error: f64,
    /// Linearized Monte Carlo standard error of `variance`.
    pub variance_standard_error: f64,
}

/// Estimates E[H] and Var[H] for Dirichlet(alpha) restricted to b >= bounds.
///
/// Importance weights are the unnormalized Dirichlet density at the uniform
/// draws; self-normalization cancels the (truncated) normalizing constant,
/// which has no closed form.
pub fn truncated_entropy_moments(
    alpha: &[f64],
    bounds: &[f64],
    m: usize,
    seed: u64,
) -> Result<TruncatedMoments> {
    if alpha.len() != bounds.len() {
        return Err(Error::domain(format!(
            "alpha has {} components but bounds has {}",
            alpha.len(),
            bounds.len()
        )));
    }
    for &a in alpha {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::domain(format!(
                "Dirichlet parameters must be finite and positive, got {a}"
            )));
        }
    }
    let covered = validate_bounds(bounds)?;
    if m == 0 {
        return Err(Error::domain("sample count must be positive"));
    }
    if 1.0 - covered <= 0.0 {
        // Fully covered: the region is the single point b = bounds.
        let h = shannon_entropy(bounds);
        return Ok(TruncatedMoments {
            mean: h,
            variance: 0.0,
            ess: m as f64,
            mean_standard_error: 0.0,
            variance_standard_error: 0.0,
        });
    }

    let samples = sample_truncated_uniform(bounds, m, seed)?;
    let mut log_w = Vec::with_capacity(m);
    let mut h = Vec::with_capacity(m);
    for b in &samples {
        let lw: f64 = alpha
            .iter()
            .zip(b)
            .map(|(&a, &bj)| (a - 1.0) * bj.max(1e-300).ln())
            .sum();
        log_w.push(lw);
        h.push(shannon_entropy(b));
    }
    let max_lw = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&lw| (lw - max_lw).exp()).collect();
    let w_sum: f64 = w.iter().sum();
    let w_norm: Vec<f64> = w.iter().map(|&x| x / w_sum).collect();

    let mean: f64 = w_norm.iter().zip(&h).map(|(&wi, &hi)| wi * hi).sum();
    let second: f64 = w_norm.iter().zip(&h).map(|(&wi, &hi)| wi * hi * hi).sum();
    let variance = (second - mean * mean).max(0.0);
    let w_sq: f64 = w_norm.iter().map(|&wi| wi * wi).sum();
    let ess = (1.0 / w_sq).min(m as f64);
    if ess < 100.0 {
        log::warn!("effective sample size {ess:.1} below 100; truncated moments are noisy");
    }
    let mean_se = w_norm
        .iter()
        .zip(&h)
        .map(|(&wi, &hi)| (wi * (hi - mean)).powi(2))
        .sum::<f64>()
        .sqrt();
    let var_se = w_norm
        .iter()
        .zip(&h)
        .map(|(&wi, &hi)| (wi * ((hi - mean).powi(2) - variance)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(TruncatedMoments {
        mean,
        variance,
        ess,
        mean_standard_error: mean_se,
        variance_standard_error: var_se,
    })
}
