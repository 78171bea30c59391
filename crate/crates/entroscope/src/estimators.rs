//! Semantic-entropy estimators: the Bayesian belief with hierarchical
//! support handling and probability-floor constraints, the sample-based
//! baselines, and the adaptive sampling loop.

use std::collections::HashMap;

use rand::Rng;

use crate::data::{count_meanings, subsample, PromptRecord, SampleBatch, SampleRecord};
use crate::dirichlet::{entropy_mean, entropy_variance, DirichletParams};
use crate::seeding::{stream_hash, stream_rng};
use crate::support::{aggregate_over_support, condition_support, SupportPrior};
use crate::truncated::{build_constraints, truncated_entropy_moments};
use crate::{shannon_entropy, Error, Result};

/// Knobs shared by the Bayesian estimator and the adaptive loop.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Symmetric Dirichlet prior concentration per meaning class.
    pub alpha_prior: f64,
    /// Adaptive loop stops once belief variance drops to this.
    pub gamma: f64,
    /// Importance-sampling draws per support size.
    pub mc_samples: usize,
    /// Adaptive draw budget; `None` means the prompt's pool size.
    pub n_max: Option<usize>,
    /// Feed observed sequence probabilities in as lower bounds.
    pub use_constraints: bool,
    /// Condition the support belief on K > k_observed instead of K >=.
    pub strict_support_conditioning: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            alpha_prior: 0.5,
            gamma: 0.05,
            mc_samples: 10_000,
            n_max: None,
            use_constraints: true,
            strict_support_conditioning: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha_prior.is_finite() || self.alpha_prior <= 0.0 {
            return Err(Error::domain(format!(
                "alpha_prior must be finite and positive, got {}",
                self.alpha_prior
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::domain(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        if self.mc_samples == 0 {
            return Err(Error::domain("mc_samples must be positive"));
        }
        if self.n_max == Some(0) {
            return Err(Error::domain("n_max must be positive when set"));
        }
        Ok(())
    }
}

/// One support size's contribution to the belief.
#[derive(Debug, Clone)]
pub struct KComponent {
    pub k: usize,
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Posterior belief about a prompt's semantic entropy.
#[derive(Debug, Clone)]
pub struct EntropyBelief {
    pub mean: f64,
    pub variance: f64,
    /// Samples consumed to form this belief.
    pub n_used: usize,
    pub per_k: Vec<KComponent>,
}

/// Full Bayesian belief from one batch of meaning-labeled samples.
///
/// Counts feed a Dirichlet posterior per candidate support size K; observed
/// sequence probabilities (when enabled) truncate each posterior; the
/// conditioned support belief mixes the per-K moments.
pub fn bayesian_belief(
    batch: &SampleBatch,
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
) -> Result<EntropyBelief> {
    cfg.validate()?;
    if batch.records.is_empty() {
        return Err(Error::domain("cannot form a belief from zero samples"));
    }
    let counts = count_meanings(&batch.records);
    let observed: Vec<u32> = counts.keys().cloned().collect();
    let k_obs = observed.len();
    let slot_of: HashMap<u32, usize> = observed
        .iter()
        .enumerate()
        .map(|(slot, &label)| (label, slot))
        .collect();

    let cond = condition_support(prior, k_obs, cfg.strict_support_conditioning)?;

    let base_bounds = if cfg.use_constraints {
        let remapped: Vec<SampleRecord> = batch
            .records
            .iter()
            .map(|r| SampleRecord {
                meaning: slot_of[&r.meaning] as u32,
                ..r.clone()
            })
            .collect();
        build_constraints(&remapped, k_obs)?.bounds
    } else {
        vec![0.0; k_obs]
    };

    // Bounds that are all exactly zero cannot truncate anything; the
    // posterior moments are then available in closed form with no MC noise.
    let bounds_active = base_bounds.iter().any(|&b| b > 0.0);
    let mut moments = Vec::with_capacity(cond.weights.len());
    for &k in cond.weights.keys() {
        debug_assert!(k >= k_obs);
        let mut alpha: Vec<f64> = observed
            .iter()
            .map(|label| cfg.alpha_prior + f64::from(counts[label]))
            .collect();
        alpha.resize(k, cfg.alpha_prior);
        if bounds_active {
            let mut bounds = base_bounds.clone();
            bounds.resize(k, 0.0);
            let seed = stream_hash(batch.mc_seed, &["snis", &k.to_string()]);
            let m = truncated_entropy_moments(&alpha, &bounds, cfg.mc_samples, seed)?;
            moments.push((k, m.mean, m.variance));
        } else {
            let params = DirichletParams::new(alpha)?;
            moments.push((k, entropy_mean(&params), entropy_variance(&params)));
        }
    }

    let mut belief = aggregate_over_support(&cond, &moments)?;
    belief.n_used = batch.records.len();
    Ok(belief)
}

/// Plug-in entropy of the empirical meaning frequencies.
pub fn histogram_entropy(counts: &crate::data::MeaningCounts) -> f64 {
    let n: u32 = counts.values().sum();
    assert!(n > 0, "histogram entropy needs samples");
    let freqs: Vec<f64> = counts
        .values()
        .map(|&c| f64::from(c) / f64::from(n))
        .collect();
    shannon_entropy(&freqs)
}

/// Entropy of observed per-meaning probability mass, renormalized over what
/// was seen. Duplicate texts count once; set semantics, not draw counts.
pub fn rescaled_entropy(records: &[SampleRecord], length_normalized: bool) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::domain("rescaled entropy needs samples"));
    }
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut mass: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    for r in records {
        if seen.insert(&r.text, ()).is_none() {
            let lp = if length_normalized {
                r.log_prob_len_norm
            } else {
                r.log_prob
            };
            // The cap only guards exp overflow on absurd inputs.
            *mass.entry(r.meaning).or_insert(0.0) += lp.min(700.0).exp();
        }
    }
    let total: f64 = mass.values().sum();
    if total <= 0.0 {
        return Err(Error::domain(
            "every observed probability underflowed to zero; rescaled entropy undefined",
        ));
    }
    let probs: Vec<f64> = mass.values().map(|&q| q / total).collect();
    Ok(shannon_entropy(&probs))
}

/// Likelihood baseline: improbable greedy answers score as hallucinations.
pub fn log_likelihood_score(record: &PromptRecord) -> f64 {
    -record.low_temp_log_prob
}

/// Self-evaluation baseline: low self-reported truthfulness scores high.
pub fn p_true_score(record: &PromptRecord) -> f64 {
    1.0 - record.p_true
}

/// The scoring rules the evaluation harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Bayes,
    Histogram,
    Rescaled,
    RescaledLenNorm,
    LogLikelihood,
    PTrue,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::Bayes,
        Estimator::Histogram,
        Estimator::Rescaled,
        Estimator::RescaledLenNorm,
        Estimator::LogLikelihood,
        Estimator::PTrue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Bayes => "bayes",
            Estimator::Histogram => "histogram",
            Estimator::Rescaled => "rescaled",
            Estimator::RescaledLenNorm => "rescaled-len",
            Estimator::LogLikelihood => "loglik",
            Estimator::PTrue => "ptrue",
        }
    }

    pub fn from_name(name: &str) -> Result<Estimator> {
        Estimator::ALL
            .iter()
            .find(|e| e.name() == name)
            .copied()
            .ok_or_else(|| {
                let known: Vec<&str> = Estimator::ALL.iter().map(|e| e.name()).collect();
                Error::domain(format!(
                    "unknown estimator {name:?}; expected one of {}",
                    known.join(", ")
                ))
            })
    }

    /// Whether the score depends on the sampled batch (vs the prompt alone).
    pub fn needs_samples(self) -> bool {
        !matches!(self, Estimator::LogLikelihood | Estimator::PTrue)
    }

    /// Whether the score is an entropy estimate comparable to a true value.
    pub fn has_entropy_scale(self) -> bool {
        self.needs_samples()
    }
}

/// Hallucination score for one prompt at sampling budget `n`.
/// Higher always means more likely hallucination.
pub fn score_prompt(
    record: &PromptRecord,
    estimator: Estimator,
    n: usize,
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<f64> {
    match estimator {
        Estimator::LogLikelihood => Ok(log_likelihood_score(record)),
        Estimator::PTrue => Ok(p_true_score(record)),
        Estimator::Histogram => {
            let batch = subsample(record, n, seed)?;
            Ok(histogram_entropy(&count_meanings(&batch.records)))
        }
        Estimator::Rescaled => {
            let batch = subsample(record, n, seed)?;
            rescaled_entropy(&batch.records, false)
        }
        Estimator::RescaledLenNorm => {
            let batch = subsample(record, n, seed)?;
            rescaled_entropy(&batch.records, true)
        }
        Estimator::Bayes => {
            let batch = subsample(record, n, seed)?;
            Ok(bayesian_belief(&batch, prior, cfg)?.mean)
        }
    }
}

/// Runs the adaptive loop until belief variance reaches `stop_gamma` or the
/// draw budget is spent, returning the belief after every draw taken.
///
/// Draw order and per-step Monte Carlo seeds depend only on (seed,
/// prompt_id), never on gamma, so trajectories for different thresholds
/// share a prefix.
fn adaptive_trajectory(
    record: &PromptRecord,
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
    stop_gamma: f64,
    seed: u64,
) -> Result<Vec<EntropyBelief>> {
    cfg.validate()?;
    let n_max = cfg.n_max.unwrap_or(record.samples.len());
    if n_max == 0 {
        return Err(Error::domain("adaptive budget must be positive"));
    }
    let mut draw_rng = stream_rng(seed, &["adaptive-draws", &record.prompt_id]);
    let mut drawn: Vec<SampleRecord> = Vec::with_capacity(n_max);
    let mut steps = Vec::new();
    for n in 1..=n_max {
        let idx = draw_rng.random_range(0..record.samples.len());
        drawn.push(record.samples[idx].clone());
        let batch = SampleBatch {
            prompt_id: record.prompt_id.clone(),
            records: drawn.clone(),
            mc_seed: stream_hash(seed, &["adaptive-mc", &record.prompt_id, &n.to_string()]),
        };
        let belief = bayesian_belief(&batch, prior, cfg)?;
        let done = belief.variance <= stop_gamma;
        steps.push(belief);
        if done {
            break;
        }
    }
    Ok(steps)
}

/// Draws samples one at a time until the belief variance falls to
/// `cfg.gamma` or the budget runs out; returns the final belief with
/// `n_used` set to the draws consumed.
pub fn adaptive_estimate(
    record: &PromptRecord,
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<EntropyBelief> {
    let steps = adaptive_trajectory(record, prior, cfg, cfg.gamma, seed)?;
    Ok(steps.into_iter().last().expect("budget >= 1 yields a step"))
}

/// Adaptive beliefs for several thresholds from one shared trajectory.
/// Output order matches `gammas`; each entry equals what `adaptive_estimate`
/// would return with that gamma.
pub fn adaptive_estimates_for_gammas(
    record: &PromptRecord,
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
    gammas: &[f64],
    seed: u64,
) -> Result<Vec<EntropyBelief>> {
    if gammas.is_empty() {
        return Err(Error::domain("need at least one gamma"));
    }
    for &g in gammas {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::domain(format!(
                "gamma must be finite and nonnegative, got {g}"
            )));
        }
    }
    let min_gamma = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    let steps = adaptive_trajectory(record, prior, cfg, min_gamma, seed)?;
    let picks = gammas
        .iter()
        .map(|&g| {
            steps
                .iter()
                .find(|b| b.variance <= g)
                .unwrap_or_else(|| steps.last().expect("budget >= 1 yields a step"))
                .clone()
        })
        .collect();
    Ok(picks)
}
