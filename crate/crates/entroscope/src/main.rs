//! Command-line front end: fit support priors, evaluate estimators, and
//! generate synthetic benchmarks.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use entroscope::data::{
    atomic_write, generate_synthetic, load_dataset, write_dataset, MeaningFamily, SplitRule,
    SyntheticSpec,
};
use entroscope::estimators::{Estimator, EstimatorConfig};
use entroscope::eval::{rows_to_csv, rows_to_json, run_adaptive_sweep, run_fixed_budget, EvalRow};
use entroscope::support::{fit_support_prior, SupportPrior};

#[derive(Parser)]
#[command(
    name = "entroscope",
    version,
    about = "Semantic-entropy estimation and hallucination detection from small sample budgets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a support-size prior from the first train-count prompts.
    FitPrior {
        #[arg(long)]
        dataset: PathBuf,
        /// Number of leading prompts to treat as training data.
        #[arg(long, default_value_t = 200)]
        train_count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score estimators on the held-out split and write a CSV of results.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Root seed; every random choice in the run derives from it.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Support prior JSON; fitted from the train split when absent.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Leading prompts reserved for training; the rest are evaluated.
        #[arg(long, default_value_t = 200)]
        train_count: usize,
        /// Symmetric Dirichlet concentration of the meaning prior.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        mc_samples: usize,
        /// Single fixed sampling budget.
        #[arg(long, conflicts_with = "n_list")]
        n: Option<usize>,
        /// Comma-separated fixed budgets (default 2,5,10 when no gammas).
        #[arg(long)]
        n_list: Option<String>,
        /// Single adaptive stopping threshold on belief variance.
        #[arg(long, conflicts_with = "gammas")]
        gamma: Option<f64>,
        /// Comma-separated adaptive stopping thresholds.
        #[arg(long)]
        gammas: Option<String>,
        /// Comma-separated estimator names.
        #[arg(long, default_value = "bayes,histogram,rescaled,rescaled-len,loglik,ptrue")]
        estimators: String,
        /// Condition the support belief on K > observed count.
        #[arg(long)]
        strict_support: bool,
        /// Ignore observed sequence probabilities (no truncation).
        #[arg(long)]
        no_constraints: bool,
        /// Adaptive draw budget; defaults to each prompt's pool size.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        bootstrap_reps: usize,
    },
    /// Generate a synthetic dataset with known true semantic entropy.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        prompts: usize,
        /// Meaning-share family: dirichlet, zipf, or fixed.
        #[arg(long, default_value = "dirichlet")]
        family: String,
        #[arg(long, default_value_t = 1.0)]
        concentration: f64,
        #[arg(long, default_value_t = 1.0)]
        exponent: f64,
        /// Comma-separated shares for the fixed family.
        #[arg(long)]
        probs: Option<String>,
        #[arg(long, default_value_t = 1)]
        meanings_min: usize,
        #[arg(long, default_value_t = 4)]
        meanings_max: usize,
        /// How meaning mass splits across texts: even or random.
        #[arg(long, default_value = "even")]
        split: String,
        #[arg(long, default_value_t = 2)]
        sequences_per_meaning: usize,
        #[arg(long, default_value_t = 1)]
        split_min: usize,
        #[arg(long, default_value_t = 3)]
        split_max: usize,
        /// Stored samples per prompt.
        #[arg(long, default_value_t = 20)]
        pool_size: usize,
        /// Label prompts above this true entropy as hallucinations
        /// (default: the median, which balances classes).
        #[arg(long)]
        label_threshold: Option<f64>,
    },
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().to_string().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn init_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("ENTROSCOPE_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .context("ENTROSCOPE_THREADS must be a positive integer")?;
        if n == 0 {
            bail!("ENTROSCOPE_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("failed to size the thread pool")?;
    }
    Ok(())
}

/// Fail before any work starts if results cannot be written where asked.
fn ensure_writable_dir(out: &Path) -> anyhow::Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => return Ok(()),
    };
    if !parent.is_dir() {
        bail!("output directory {} does not exist", parent.display());
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().with_context(|| format!("bad {what} entry {s:?}")))
        .collect()
}

fn main() -> anyhow::Result<()> {
    let _ = log::set_logger(&LOGGER);
    log::set_max_level(log::LevelFilter::Warn);
    init_threads()?;
    match Cli::parse().command {
        Command::FitPrior {
            dataset,
            train_count,
            out,
        } => cmd_fit_prior(&dataset, train_count, &out),
        Command::Evaluate {
            dataset,
            seed,
            out,
            prior,
            train_count,
            alpha,
            mc_samples,
            n,
            n_list,
            gamma,
            gammas,
            estimators,
            strict_support,
            no_constraints,
            n_max,
            bootstrap_reps,
        } => cmd_evaluate(EvaluateArgs {
            dataset,
            seed,
            out,
            prior,
            train_count,
            alpha,
            mc_samples,
            n,
            n_list,
            gamma,
            gammas,
            estimators,
            strict_support,
            no_constraints,
            n_max,
            bootstrap_reps,
        }),
        Command::Synth {
            out,
            seed,
            prompts,
            family,
            concentration,
            exponent,
            probs,
            meanings_min,
            meanings_max,
            split,
            sequences_per_meaning,
            split_min,
            split_max,
            pool_size,
            label_threshold,
        } => cmd_synth(SynthArgs {
            out,
            seed,
            prompts,
            family,
            concentration,
            exponent,
            probs,
            meanings_min,
            meanings_max,
            split,
            sequences_per_meaning,
            split_min,
            split_max,
            pool_size,
            label_threshold,
        }),
    }
}

fn cmd_fit_prior(dataset: &Path, train_count: usize, out: &Path) -> anyhow::Result<()> {
    ensure_writable_dir(out)?;
    let records = load_dataset(dataset)
        .with_context(|| format!("failed to load {}", dataset.display()))?;
    if train_count > records.len() {
        bail!(
            "train_count {train_count} exceeds the {} prompts in the dataset",
            records.len()
        );
    }
    let prior = fit_support_prior(&records[..train_count]);
    prior.save(out)?;
    println!(
        "fitted support prior over {} size(s) from {train_count} prompt(s) -> {}",
        prior.weights.len(),
        out.display()
    );
    Ok(())
}

struct EvaluateArgs {
    dataset: PathBuf,
    seed: u64,
    out: PathBuf,
    prior: Option<PathBuf>,
    train_count: usize,
    alpha: f64,
    mc_samples: usize,
    n: Option<usize>,
    n_list: Option<String>,
    gamma: Option<f64>,
    gammas: Option<String>,
    estimators: String,
    strict_support: bool,
    no_constraints: bool,
    n_max: Option<usize>,
    bootstrap_reps: usize,
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    ensure_writable_dir(&args.out)?;
    let json_path = args.out.with_extension("json");
    if json_path == args.out {
        bail!("--out must not end in .json; the CSV is primary and JSON is written alongside");
    }
    let records = load_dataset(&args.dataset)
        .with_context(|| format!("failed to load {}", args.dataset.display()))?;
    if args.train_count >= records.len() {
        bail!(
            "train_count {} leaves no test prompts out of {}",
            args.train_count,
            records.len()
        );
    }
    let (train, test) = records.split_at(args.train_count);
    let prior = match &args.prior {
        Some(path) => SupportPrior::load(path)
            .with_context(|| format!("failed to load prior {}", path.display()))?,
        None => fit_support_prior(train),
    };

    let gammas: Vec<f64> = match (&args.gamma, &args.gammas) {
        (Some(g), _) => vec![*g],
        (None, Some(raw)) => parse_list(raw, "gamma")?,
        (None, None) => vec![],
    };
    // Fixed budgets default on, but a pure adaptive run needs no N flags.
    let n_budgets: Vec<usize> = match (&args.n, &args.n_list) {
        (Some(n), _) => vec![*n],
        (None, Some(raw)) => parse_list(raw, "budget")?,
        (None, None) => {
            if gammas.is_empty() {
                vec![2, 5, 10]
            } else {
                vec![]
            }
        }
    };
    if n_budgets.is_empty() && gammas.is_empty() {
        bail!("nothing to evaluate: provide fixed budgets, gammas, or both");
    }

    let estimator_names: Vec<String> = parse_list(&args.estimators, "estimator")?;
    let estimators: Vec<Estimator> = estimator_names
        .iter()
        .map(|n| Estimator::from_name(n))
        .collect::<entroscope::Result<_>>()?;

    let cfg = EstimatorConfig {
        alpha_prior: args.alpha,
        gamma: gammas.first().copied().unwrap_or(0.05),
        mc_samples: args.mc_samples,
        n_max: args.n_max,
        use_constraints: !args.no_constraints,
        strict_support_conditioning: args.strict_support,
    };
    cfg.validate()?;

    let mut rows: Vec<EvalRow> = Vec::new();
    if !n_budgets.is_empty() {
        rows.extend(run_fixed_budget(
            test,
            &prior,
            &cfg,
            &n_budgets,
            &estimators,
            args.bootstrap_reps,
            args.seed,
        )?);
    }
    if !gammas.is_empty() {
        rows.extend(run_adaptive_sweep(
            test,
            &prior,
            &cfg,
            &gammas,
            args.bootstrap_reps,
            args.seed,
        )?);
    }

    atomic_write(&args.out, rows_to_csv(&rows).as_bytes())?;
    atomic_write(&json_path, rows_to_json(&rows)?.as_bytes())?;
    write_manifest(&args, &gammas, &n_budgets, &estimator_names, train.len(), test.len())?;
    println!(
        "wrote {} result row(s) to {} (and {})",
        rows.len(),
        args.out.display(),
        json_path.display()
    );
    Ok(())
}

/// Records what produced the CSV. No timestamps: reruns must be
/// byte-identical.
fn write_manifest(
    args: &EvaluateArgs,
    gammas: &[f64],
    n_budgets: &[usize],
    estimators: &[String],
    n_train: usize,
    n_test: usize,
) -> anyhow::Result<()> {
    let manifest = serde_json::json!({
        "command": "evaluate",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "dataset": args.dataset.display().to_string(),
        "prior": args.prior.as_ref().map(|p| p.display().to_string()),
        "out": args.out.display().to_string(),
        "seed": args.seed,
        "train_count": args.train_count,
        "n_prompts_train": n_train,
        "n_prompts_test": n_test,
        "config": {
            "alpha_prior": args.alpha,
            "mc_samples": args.mc_samples,
            "n_max": args.n_max,
            "use_constraints": !args.no_constraints,
            "strict_support_conditioning": args.strict_support,
        },
        "n_list": n_budgets,
        "gammas": gammas,
        "estimators": estimators,
        "bootstrap_reps": args.bootstrap_reps,
    });
    let path = PathBuf::from(format!("{}.manifest.json", args.out.display()));
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    atomic_write(&path, &bytes)?;
    Ok(())
}

struct SynthArgs {
    out: PathBuf,
    seed: u64,
    prompts: usize,
    family: String,
    concentration: f64,
    exponent: f64,
    probs: Option<String>,
    meanings_min: usize,
    meanings_max: usize,
    split: String,
    sequences_per_meaning: usize,
    split_min: usize,
    split_max: usize,
    pool_size: usize,
    label_threshold: Option<f64>,
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    ensure_writable_dir(&args.out)?;
    let family = match args.family.as_str() {
        "dirichlet" => MeaningFamily::Dirichlet {
            concentration: args.concentration,
        },
        "zipf" => MeaningFamily::Zipf {
            exponent: args.exponent,
        },
        "fixed" => {
            let raw = args
                .probs
                .as_deref()
                .context("--family fixed requires --probs")?;
            MeaningFamily::Fixed {
                probs: parse_list(raw, "prob")?,
            }
        }
        other => bail!("unknown family {other:?}; expected dirichlet, zipf, or fixed"),
    };
    let split = match args.split.as_str() {
        "even" => SplitRule::Even {
            sequences_per_meaning: args.sequences_per_meaning,
        },
        "random" => SplitRule::Random {
            min: args.split_min,
            max: args.split_max,
        },
        other => bail!("unknown split {other:?}; expected even or random"),
    };
    let spec = SyntheticSpec {
        n_prompts: args.prompts,
        family,
        meanings_min: args.meanings_min,
        meanings_max: args.meanings_max,
        split,
        pool_size: args.pool_size,
        label_threshold: args.label_threshold,
    };
    let (records, _) = generate_synthetic(&spec, args.seed)?;
    write_dataset(&args.out, &records)?;
    println!("wrote {} synthetic prompt(s) to {}", records.len(), args.out.display());
    Ok(())
}
