//! End-to-end flows through the library: synthetic corpus in, result rows out.

use entroscope::data::{generate_synthetic, MeaningFamily, SplitRule, SyntheticSpec};
use entroscope::estimators::{Estimator, EstimatorConfig};
use entroscope::eval::{rmse_vs_truth, run_adaptive_sweep, run_fixed_budget};
use entroscope::support::{fit_support_prior, SupportPrior};

fn suite(n_prompts: usize, meanings: (usize, usize), pool: usize, seed: u64) -> Vec<entroscope::data::PromptRecord> {
    let spec = SyntheticSpec {
        n_prompts,
        family: MeaningFamily::Dirichlet { concentration: 1.0 },
        meanings_min: meanings.0,
        meanings_max: meanings.1,
        split: SplitRule::Even {
            sequences_per_meaning: 2,
        },
        pool_size: pool,
        label_threshold: None,
    };
    generate_synthetic(&spec, seed).unwrap().0
}

fn fast_cfg() -> EstimatorConfig {
    EstimatorConfig {
        mc_samples: 1500,
        ..EstimatorConfig::default()
    }
}

#[test]
fn fixed_budget_rows_cover_every_estimator_and_budget() {
    let records = suite(260, (2, 5), 16, 5);
    let (train, test) = records.split_at(60);
    let prior = fit_support_prior(train);
    let cfg = fast_cfg();
    let estimators = [
        Estimator::Bayes,
        Estimator::Histogram,
        Estimator::Rescaled,
        Estimator::LogLikelihood,
    ];
    let rows = run_fixed_budget(test, &prior, &cfg, &[2, 8], &estimators, 150, 77).unwrap();

    assert_eq!(rows.len(), 8);
    // Budget-major layout: all estimators at N=2, then all at N=8.
    for (i, row) in rows.iter().enumerate() {
        let want_n = if i < 4 { 2.0 } else { 8.0 };
        assert_eq!(row.n_or_avg_n, want_n);
        assert_eq!(row.estimator, estimators[i % 4].name());
        assert!((0.0..=1.0).contains(&row.auroc), "auroc {}", row.auroc);
        assert!(row.ci_half_width >= 0.0);
    }
    // Entropy-scale estimators get an RMSE column; score-only ones do not.
    for row in &rows {
        if row.estimator == "loglik" {
            assert!(row.rmse.is_none());
        } else {
            assert!(row.rmse.unwrap().is_finite());
        }
    }
    let bayes_at_8 = &rows[4];
    assert!(
        bayes_at_8.auroc > 0.65,
        "bayes auroc at N=8 only {}",
        bayes_at_8.auroc
    );
}

#[test]
fn rmse_shrinks_as_the_budget_grows() {
    let records = suite(150, (2, 4), 60, 19);
    let prior = fit_support_prior(&records[..50]);
    let cfg = fast_cfg();
    let coarse = rmse_vs_truth(&records[50..], Estimator::Histogram, 3, &prior, &cfg, 4).unwrap();
    let fine = rmse_vs_truth(&records[50..], Estimator::Histogram, 48, &prior, &cfg, 4).unwrap();
    assert!(
        fine < coarse,
        "histogram rmse did not shrink: {coarse} at N=3 vs {fine} at N=48"
    );
}

#[test]
fn plugin_entropy_converges_on_three_meaning_prompts() {
    // At ten thousand draws from a wide pool the plug-in estimate sits on
    // top of the true entropy.
    let records = suite(12, (3, 3), 50_000, 13);
    let prior = SupportPrior::point_mass(3);
    let cfg = fast_cfg();
    let rmse = rmse_vs_truth(&records, Estimator::Histogram, 10_000, &prior, &cfg, 1).unwrap();
    assert!(rmse < 0.02, "plug-in rmse {rmse} at N=10000");
}

#[test]
fn bayesian_belief_beats_plugin_at_two_draws() {
    let records = suite(240, (2, 5), 16, 23);
    let (train, test) = records.split_at(120);
    let prior = fit_support_prior(train);
    let cfg = fast_cfg();
    let bayes = rmse_vs_truth(test, Estimator::Bayes, 2, &prior, &cfg, 6).unwrap();
    let hist = rmse_vs_truth(test, Estimator::Histogram, 2, &prior, &cfg, 6).unwrap();
    assert!(
        bayes < hist,
        "expected the posterior mean to beat the plug-in at N=2: {bayes} vs {hist}"
    );
}

#[test]
fn adaptive_rows_report_average_budgets() {
    let records = suite(60, (2, 4), 12, 31);
    let (train, test) = records.split_at(20);
    let prior = fit_support_prior(train);
    let cfg = EstimatorConfig {
        mc_samples: 800,
        ..EstimatorConfig::default()
    };
    let rows = run_adaptive_sweep(test, &prior, &cfg, &[0.15, 0.02], 80, 41).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row.estimator, "bayes-adaptive");
        assert!((1.0..=12.0).contains(&row.n_or_avg_n));
        assert!((0.0..=1.0).contains(&row.auroc));
    }
    // A looser variance target never needs more draws.
    assert!(rows[0].n_or_avg_n <= rows[1].n_or_avg_n);
}
