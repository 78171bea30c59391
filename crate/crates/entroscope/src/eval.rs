//! Hallucination-detection evaluation: AUROC with exact tie handling,
//! prompt-level bootstrap intervals, RMSE against known entropy, and the
//! fixed-budget / adaptive sweep drivers behind the CLI.

use rayon::prelude::*;

use crate::data::PromptRecord;
use crate::estimators::{
    adaptive_estimates_for_gammas, score_prompt, Estimator, EstimatorConfig,
};
use crate::seeding::stream_rng;
use crate::support::SupportPrior;
use crate::{Error, Result};
use rand::Rng;

/// Area under the ROC curve via the rank-sum identity, ties counted half.
///
/// Average ranks are half-integers, so the rank sum is exact in f64 and the
/// result equals explicit pair counting bit for bit.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("scores must be finite"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::domain("labels must be 0 or 1"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain(
            "AUROC needs at least one positive and one negative label",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average (i + j + 1) / 2.
        let avg_rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Bootstrap over prompts: returns (replicate mean, 1.96 * replicate SD).
///
/// Replicates that lose one class entirely are redrawn; each replicate has
/// its own derived stream, so the result is independent of execution order.
pub fn bootstrap_auroc_ci(
    scores: &[f64],
    labels: &[u8],
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps < 2 {
        return Err(Error::domain("bootstrap needs at least 2 replicates"));
    }
    auroc(scores, labels)?;
    let n = scores.len();
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, &["bootstrap-rep", &r.to_string()]);
            for _attempt in 0..1000 {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
                let l: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
                if l.iter().any(|&x| x == 1) && l.iter().any(|&x| x == 0) {
                    return auroc(&s, &l);
                }
            }
            Err(Error::domain(
                "bootstrap could not draw a two-class replicate in 1000 tries",
            ))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / reps as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (reps - 1) as f64).sqrt();
    Ok((mean, 1.96 * sd))
}

/// Root-mean-square error of an entropy-scale estimator against recorded
/// per-prompt true semantic entropy.
pub fn rmse_vs_truth(
    records: &[PromptRecord],
    estimator: Estimator,
    n: usize,
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<f64> {
    if !estimator.has_entropy_scale() {
        return Err(Error::domain(format!(
            "estimator {:?} does not produce entropy values",
            estimator.name()
        )));
    }
    if records.is_empty() {
        return Err(Error::domain("need at least one prompt"));
    }
    let sq: Vec<f64> = records
        .par_iter()
        .map(|r| {
            let truth = r.true_se.ok_or_else(|| {
                Error::dataset(&r.prompt_id, "true_se missing; RMSE undefined".to_string())
            })?;
            let est = score_prompt(r, estimator, n, prior, cfg, seed)?;
            Ok((est - truth) * (est - truth))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((sq.iter().sum::<f64>() / sq.len() as f64).sqrt())
}

/// One line of evaluation output.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalRow {
    pub estimator: String,
    /// Fixed budget N, or the average adaptive n_used.
    pub n_or_avg_n: f64,
    pub auroc: f64,
    pub ci_half_width: f64,
    /// Present only when every prompt carries true_se and the estimator is
    /// on the entropy scale.
    pub rmse: Option<f64>,
}

fn labels_of(test: &[PromptRecord]) -> Vec<u8> {
    test.iter().map(|r| r.label).collect()
}

fn rmse_from_scores(test: &[PromptRecord], scores: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    for (r, &s) in test.iter().zip(scores) {
        total += (s - r.true_se?) * (s - r.true_se?);
    }
    Some((total / test.len() as f64).sqrt())
}

/// Scores every estimator at every fixed budget, one row per pair.
/// Rows are ordered by budget, then by the estimator list.
pub fn run_fixed_budget(
    test: &[PromptRecord],
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
    n_list: &[usize],
    estimators: &[Estimator],
    bootstrap_reps: usize,
    seed: u64,
) -> Result<Vec<EvalRow>> {
    cfg.validate()?;
    if test.is_empty() || n_list.is_empty() || estimators.is_empty() {
        return Err(Error::domain(
            "evaluation needs prompts, at least one budget, and at least one estimator",
        ));
    }
    if n_list.iter().any(|&n| n == 0) {
        return Err(Error::domain("budgets must be positive"));
    }
    let labels = labels_of(test);
    let mut rows = Vec::with_capacity(n_list.len() * estimators.len());
    for &n in n_list {
        for &est in estimators {
            let scores: Vec<f64> = test
                .par_iter()
                .map(|r| score_prompt(r, est, n, prior, cfg, seed))
                .collect::<Result<Vec<f64>>>()?;
            let point = auroc(&scores, &labels)?;
            let (_, half_width) =
                bootstrap_auroc_ci(&scores, &labels, bootstrap_reps, seed)?;
            let rmse = if est.has_entropy_scale() {
                rmse_from_scores(test, &scores)
            } else {
                None
            };
            rows.push(EvalRow {
                estimator: est.name().to_string(),
                n_or_avg_n: n as f64,
                auroc: point,
                ci_half_width: half_width,
                rmse,
            });
        }
    }
    Ok(rows)
}

/// Runs the adaptive estimator once per prompt and reads off a row per
/// stopping threshold, reusing the shared trajectory.
pub fn run_adaptive_sweep(
    test: &[PromptRecord],
    prior: &SupportPrior,
    cfg: &EstimatorConfig,
    gammas: &[f64],
    bootstrap_reps: usize,
    seed: u64,
) -> Result<Vec<EvalRow>> {
    cfg.validate()?;
    if test.is_empty() || gammas.is_empty() {
        return Err(Error::domain(
            "adaptive sweep needs prompts and at least one gamma",
        ));
    }
    let labels = labels_of(test);
    let per_prompt: Vec<Vec<crate::estimators::EntropyBelief>> = test
        .par_iter()
        .map(|r| adaptive_estimates_for_gammas(r, prior, cfg, gammas, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(gammas.len());
    for (g_idx, _g) in gammas.iter().enumerate() {
        let scores: Vec<f64> = per_prompt.iter().map(|b| b[g_idx].mean).collect();
        let avg_n = per_prompt
            .iter()
            .map(|b| b[g_idx].n_used as f64)
            .sum::<f64>()
            / test.len() as f64;
        let point = auroc(&scores, &labels)?;
        let (_, half_width) =
            bootstrap_auroc_ci(&scores, &labels, bootstrap_reps, seed)?;
        rows.push(EvalRow {
            estimator: "bayes-adaptive".to_string(),
            n_or_avg_n: avg_n,
            auroc: point,
            ci_half_width: half_width,
            rmse: rmse_from_scores(test, &scores),
        });
    }
    Ok(rows)
}

/// Renders rows in the stable CSV layout the CLI writes.
pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from("estimator,n_or_avg_n,auroc,ci_half_width,rmse\n");
    for r in rows {
        let rmse = r.rmse.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.estimator, r.n_or_avg_n, r.auroc, r.ci_half_width, rmse
        ));
    }
    out
}

/// The same rows as JSON, for plotting pipelines that dislike CSV.
pub fn rows_to_json(rows: &[EvalRow]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(rows).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}
