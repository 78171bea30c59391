//! Estimation of semantic entropy from small LLM sample budgets.
//!
//! Given a handful of sampled responses per prompt, each tagged with a
//! meaning-class id and a sequence log-probability, this crate maintains a
//! Bayesian belief over the prompt's meaning distribution and reports the
//! posterior mean and variance of its Shannon entropy. High semantic entropy
//! flags prompts where the model is likely to confabulate.
//!
//! The belief is a Dirichlet posterior over meaning probabilities, truncated
//! by the observed sequence probabilities (each meaning's probability is at
//! least the total probability of the distinct sequences seen for it) and
//! mixed over an empirical prior on the number of distinct meanings. Entropy
//! moments come in closed form through digamma identities when no truncation
//! applies, and through self-normalized importance sampling otherwise.
//!
//! Module map:
//! - [`data`]: dataset records, JSONL round-trip, subsampling, synthetic data
//! - [`special`]: digamma and trigamma
//! - [`dirichlet`]: closed-form entropy moments under a Dirichlet belief
//! - [`truncated`]: probability-mass lower bounds and importance-sampled moments
//! - [`support`]: prior over support size, hierarchical aggregation
//! - [`estimators`]: the Bayesian estimator, adaptive stopping, baselines
//! - [`eval`]: AUROC, bootstrap intervals, evaluation runners

pub mod data;
pub mod dirichlet;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod seeding;
pub mod special;
pub mod support;
pub mod truncated;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Shannon entropy of a probability vector, in nats, with 0 ln 0 = 0.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}
