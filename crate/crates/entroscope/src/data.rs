//! Dataset model: JSONL prompt records, subsampling, meaning counts, and
//! synthetic data generation with known true semantic entropy.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seeding::{stream_hash, stream_rng};
use crate::{Error, Result};

fn default_version() -> u32 {
    1
}

/// One generated sequence for a prompt.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SampleRecord {
    pub text: String,
    /// Meaning-class id. Dense (0..K-1 by first appearance) after `normalize`.
    pub meaning: u32,
    /// ln P(text | prompt) under the sampling model. Must be finite and <= 0.
    pub log_prob: f64,
    /// Length-normalized log probability. Finite; sign unconstrained.
    pub log_prob_len_norm: f64,
}

/// All recorded information for a single prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub samples: Vec<SampleRecord>,
    /// ln P of the low-temperature answer; the likelihood baseline scores
    /// its negation.
    pub low_temp_log_prob: f64,
    /// Self-reported probability the low-temperature answer is true.
    pub p_true: f64,
    /// 1 = hallucination, 0 = faithful.
    pub label: u8,
    /// Ground-truth semantic entropy when the generator knows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_se: Option<f64>,
    #[serde(default = "default_version")]
    pub version: u32,
}

impl PromptRecord {
    /// Validates fields and relabels meanings densely by first appearance.
    ///
    /// Duplicate texts must agree on meaning and log_prob: they are the same
    /// sequence observed twice, not new evidence about probability mass.
    pub fn normalize(mut self) -> Result<Self> {
        let id = self.prompt_id.clone();
        let fail = |msg: String| Error::dataset(&id, msg);
        if self.prompt_id.is_empty() {
            return Err(Error::dataset("", "empty prompt_id".to_string()));
        }
        if self.samples.is_empty() {
            return Err(fail("samples must be non-empty".to_string()));
        }
        if !self.low_temp_log_prob.is_finite() || self.low_temp_log_prob > 0.0 {
            return Err(fail(format!(
                "low_temp_log_prob must be finite and <= 0, got {}",
                self.low_temp_log_prob
            )));
        }
        if !self.p_true.is_finite() || !(0.0..=1.0).contains(&self.p_true) {
            return Err(fail(format!("p_true must lie in [0, 1], got {}", self.p_true)));
        }
        if self.label > 1 {
            return Err(fail(format!("label must be 0 or 1, got {}", self.label)));
        }
        if let Some(se) = self.true_se {
            if !se.is_finite() || se < 0.0 {
                return Err(fail(format!("true_se must be finite and >= 0, got {se}")));
            }
        }
        let mut seen: HashMap<&str, (u32, f64)> = HashMap::new();
        for s in &self.samples {
            if !s.log_prob.is_finite() || s.log_prob > 0.0 {
                return Err(fail(format!(
                    "sample {:?}: log_prob must be finite and <= 0, got {}",
                    s.text, s.log_prob
                )));
            }
            if !s.log_prob_len_norm.is_finite() {
                return Err(fail(format!(
                    "sample {:?}: log_prob_len_norm must be finite",
                    s.text
                )));
            }
            match seen.get(s.text.as_str()) {
                None => {
                    seen.insert(&s.text, (s.meaning, s.log_prob));
                }
                Some(&(m, lp)) => {
                    if m != s.meaning {
                        return Err(fail(format!(
                            "text {:?} recorded with meanings {m} and {}",
                            s.text, s.meaning
                        )));
                    }
                    if lp != s.log_prob {
                        return Err(fail(format!(
                            "text {:?} recorded with log_probs {lp} and {}",
                            s.text, s.log_prob
                        )));
                    }
                }
            }
        }
        // Distinct texts partition probability mass, so their probabilities
        // cannot sum past one (tiny float overshoot tolerated).
        let mass: f64 = seen.values().map(|&(_, lp)| lp.exp()).sum();
        if mass > 1.0 + 1e-6 {
            return Err(fail(format!(
                "distinct-text probabilities sum to {mass:.8}, which exceeds 1"
            )));
        }
        let mut relabel: HashMap<u32, u32> = HashMap::new();
        for s in &mut self.samples {
            let next = relabel.len() as u32;
            let dense = *relabel.entry(s.meaning).or_insert(next);
            s.meaning = dense;
        }
        Ok(self)
    }

    /// Number of distinct meaning classes among the samples.
    pub fn distinct_meanings(&self) -> usize {
        let mut seen: Vec<u32> = self.samples.iter().map(|s| s.meaning).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Reads a JSONL dataset, normalizing every record.
pub fn load_dataset(path: &Path) -> Result<Vec<PromptRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PromptRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let record = record.normalize().map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if let Some(first) = ids.insert(record.prompt_id.clone(), idx + 1) {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!(
                    "duplicate prompt_id {:?} (first seen on line {first})",
                    record.prompt_id
                ),
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// Writes bytes to `path` atomically: temp file in the same directory, then
/// rename, so readers never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp-{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
            std::process::id()
        )),
        None => Path::new(&format!(".atomic-tmp-{}", std::process::id())).to_path_buf(),
    };
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes records as JSONL via an atomic write.
pub fn write_dataset(path: &Path, records: &[PromptRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// A subsampled working set for one prompt, carrying the seed that any
/// Monte Carlo step over this batch must use.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub prompt_id: String,
    pub records: Vec<SampleRecord>,
    pub mc_seed: u64,
}

/// Draws `n` samples with replacement from the prompt's pool.
///
/// The stream is keyed by (seed, prompt_id, n) alone, so results do not
/// depend on iteration order over prompts.
pub fn subsample(record: &PromptRecord, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::domain("subsample size must be positive"));
    }
    let n_str = n.to_string();
    let mut rng = stream_rng(seed, &["subsample", &record.prompt_id, &n_str]);
    let records = (0..n)
        .map(|_| record.samples[rng.random_range(0..record.samples.len())].clone())
        .collect();
    Ok(SampleBatch {
        prompt_id: record.prompt_id.clone(),
        records,
        mc_seed: stream_hash(seed, &["mc", &record.prompt_id, &n_str]),
    })
}

/// Occurrence counts per meaning class, keyed by dense label.
pub type MeaningCounts = BTreeMap<u32, u32>;

pub fn count_meanings(records: &[SampleRecord]) -> MeaningCounts {
    let mut counts = MeaningCounts::new();
    for r in records {
        *counts.entry(r.meaning).or_insert(0) += 1;
    }
    counts
}

/// Distribution of meaning-class probabilities for synthetic prompts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MeaningFamily {
    /// Shares drawn from a symmetric Dirichlet with this concentration.
    Dirichlet { concentration: f64 },
    /// Share of class i proportional to (i + 1)^-exponent.
    Zipf { exponent: f64 },
    /// Every prompt gets exactly these shares (K is fixed by the length).
    Fixed { probs: Vec<f64> },
}

/// How each meaning's mass is split across distinct surface texts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SplitRule {
    Even {
        sequences_per_meaning: usize,
    },
    Random {
        min: usize,
        max: usize,
    },
}

/// Recipe for a synthetic dataset with known per-prompt semantic entropy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_prompts: usize,
    pub family: MeaningFamily,
    pub meanings_min: usize,
    pub meanings_max: usize,
    pub split: SplitRule,
    /// Samples stored per prompt (the pool later subsampling draws from).
    pub pool_size: usize,
    /// Prompts with true SE above this are labeled hallucinations. `None`
    /// uses the median true SE, which balances the classes.
    pub label_threshold: Option<f64>,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n_prompts == 0 || self.pool_size == 0 {
            return Err(Error::domain("n_prompts and pool_size must be positive"));
        }
        if self.meanings_min == 0 || self.meanings_min > self.meanings_max {
            return Err(Error::domain(
                "need 1 <= meanings_min <= meanings_max for synthetic generation",
            ));
        }
        match &self.family {
            MeaningFamily::Dirichlet { concentration } => {
                if !concentration.is_finite() || *concentration <= 0.0 {
                    return Err(Error::domain("Dirichlet concentration must be positive"));
                }
            }
            MeaningFamily::Zipf { exponent } => {
                if !exponent.is_finite() {
                    return Err(Error::domain("Zipf exponent must be finite"));
                }
            }
            MeaningFamily::Fixed { probs } => {
                if probs.is_empty() || probs.iter().any(|&p| !p.is_finite() || p <= 0.0) {
                    return Err(Error::domain("Fixed probs must be positive"));
                }
            }
        }
        match &self.split {
            SplitRule::Even { sequences_per_meaning } => {
                if *sequences_per_meaning == 0 {
                    return Err(Error::domain("sequences_per_meaning must be positive"));
                }
            }
            SplitRule::Random { min, max } => {
                if *min == 0 || min > max {
                    return Err(Error::domain("need 1 <= min <= max for random split"));
                }
            }
        }
        Ok(())
    }
}

fn meaning_shares(spec: &SyntheticSpec, rng: &mut impl Rng) -> Vec<f64> {
    let k = if spec.meanings_min == spec.meanings_max {
        spec.meanings_min
    } else {
        rng.random_range(spec.meanings_min..=spec.meanings_max)
    };
    match &spec.family {
        MeaningFamily::Dirichlet { concentration } => {
            let gamma = rand_distr::Gamma::new(*concentration, 1.0).unwrap();
            loop {
                let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
                let total: f64 = draws.iter().sum();
                if total > 0.0 && draws.iter().all(|&g| g > 0.0) {
                    return draws.iter().map(|&g| g / total).collect();
                }
            }
        }
        MeaningFamily::Zipf { exponent } => {
            let raw: Vec<f64> = (1..=k).map(|i| (i as f64).powf(-exponent)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|&r| r / total).collect()
        }
        MeaningFamily::Fixed { probs } => {
            let total: f64 = probs.iter().sum();
            probs.iter().map(|&p| p / total).collect()
        }
    }
}

/// Generates a labeled synthetic dataset. Returns the records together with
/// each prompt's true semantic entropy (also stored on the records).
///
/// Each meaning's share is split across one or more surface texts, so the
/// per-text probabilities understate per-meaning mass exactly the way real
/// samplers do. Every record passes `normalize`.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<(Vec<PromptRecord>, Vec<f64>)> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.n_prompts);
    let mut true_ses = Vec::with_capacity(spec.n_prompts);
    let noise = Normal::new(0.0, 0.02).unwrap();
    for p in 0..spec.n_prompts {
        let id = format!("synth-{p:05}");
        let mut rng = stream_rng(seed, &["synth", &id]);
        let shares = meaning_shares(spec, &mut rng);
        let true_se = crate::shannon_entropy(&shares);

        // Sequence table: text, meaning, probability of that exact text.
        let mut texts: Vec<(String, u32, f64)> = Vec::new();
        for (m, &share) in shares.iter().enumerate() {
            let pieces = match &spec.split {
                SplitRule::Even { sequences_per_meaning } => *sequences_per_meaning,
                SplitRule::Random { min, max } => {
                    if min == max {
                        *min
                    } else {
                        rng.random_range(*min..=*max)
                    }
                }
            };
            // Stick-break the share so pieces are uneven but sum back to it.
            let mut remaining = share;
            for piece in 0..pieces {
                let frac = if piece + 1 == pieces {
                    1.0
                } else {
                    rng.random_range(0.3..0.7)
                };
                let prob = remaining * frac;
                remaining -= prob;
                texts.push((format!("m{m}-v{piece}"), m as u32, prob.max(1e-300)));
            }
        }

        let cumulative: Vec<f64> = texts
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t.2;
                Some(*acc)
            })
            .collect();
        let total = *cumulative.last().unwrap();
        let mut samples = Vec::with_capacity(spec.pool_size);
        for _ in 0..spec.pool_size {
            let u: f64 = rng.random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c < u).min(texts.len() - 1);
            let (text, meaning, prob) = &texts[idx];
            let len_tokens = rng.random_range(3..=9) as f64;
            samples.push(SampleRecord {
                text: text.clone(),
                meaning: *meaning,
                log_prob: prob.ln(),
                log_prob_len_norm: prob.ln() / len_tokens,
            });
        }

        let top_share = shares.iter().cloned().fold(f64::MIN, f64::max);
        let p_true = ((-true_se).exp() + noise.sample(&mut rng)).clamp(0.0, 1.0);
        records.push(
            PromptRecord {
                prompt_id: id,
                samples,
                low_temp_log_prob: top_share.ln().min(0.0),
                p_true,
                label: 0,
                true_se: Some(true_se),
                version: 1,
            }
            .normalize()?,
        );
        true_ses.push(true_se);
    }

    let threshold = match spec.label_threshold {
        Some(t) => t,
        None => {
            let mut sorted = true_ses.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            sorted[sorted.len() / 2]
        }
    };
    for (r, &se) in records.iter_mut().zip(&true_ses) {
        r.label = u8::from(se >= threshold);
    }
    Ok((records, true_ses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(text: &str, meaning: u32, log_prob: f64) -> SampleRecord {
        SampleRecord {
            text: text.to_string(),
            meaning,
            log_prob,
            log_prob_len_norm: log_prob / 5.0,
        }
    }

    fn record(samples: Vec<SampleRecord>) -> PromptRecord {
        PromptRecord {
            prompt_id: "p0".to_string(),
            samples,
            low_temp_log_prob: -0.1,
            p_true: 0.8,
            label: 0,
            true_se: None,
            version: 1,
        }
    }

    #[test]
    fn normalize_relabels_by_first_appearance() {
        let r = record(vec![
            sample("a", 7, -1.0),
            sample("b", 2, -2.0),
            sample("a", 7, -1.0),
            sample("c", 9, -3.0),
        ])
        .normalize()
        .unwrap();
        let labels: Vec<u32> = r.samples.iter().map(|s| s.meaning).collect();
        assert_eq!(labels, vec![0, 1, 0, 2]);
    }

    #[test]
    fn normalize_rejects_inconsistent_duplicates() {
        let err = record(vec![sample("a", 0, -1.0), sample("a", 1, -1.0)])
            .normalize()
            .unwrap_err();
        assert!(err.to_string().contains("meanings"));
        let err = record(vec![sample("a", 0, -1.0), sample("a", 0, -1.5)])
            .normalize()
            .unwrap_err();
        assert!(err.to_string().contains("log_prob"));
    }

    #[test]
    fn normalize_rejects_bad_fields() {
        assert!(record(vec![]).normalize().is_err());
        assert!(record(vec![sample("a", 0, 0.5)]).normalize().is_err());
        assert!(record(vec![sample("a", 0, f64::NAN)]).normalize().is_err());

        let mut r = record(vec![sample("a", 0, -1.0)]);
        r.p_true = 1.5;
        assert!(r.normalize().is_err());

        let mut r = record(vec![sample("a", 0, -1.0)]);
        r.label = 2;
        assert!(r.normalize().is_err());

        let mut r = record(vec![sample("a", 0, -1.0)]);
        r.low_temp_log_prob = 0.2;
        assert!(r.normalize().is_err());

        let mut r = record(vec![sample("a", 0, -1.0)]);
        r.true_se = Some(-0.1);
        assert!(r.normalize().is_err());

        // Two distinct texts each claiming 90% of the mass cannot coexist.
        let r = record(vec![sample("a", 0, -0.105), sample("b", 1, -0.105)]);
        let err = r.normalize().unwrap_err();
        assert!(err.to_string().contains("exceeds 1"));
    }

    #[test]
    fn duplicate_text_mass_counted_once() {
        // The same text five times is one probability claim, not five.
        let r = record(vec![
            sample("a", 0, -0.105),
            sample("a", 0, -0.105),
            sample("a", 0, -0.105),
            sample("a", 0, -0.105),
            sample("a", 0, -0.105),
        ]);
        assert!(r.normalize().is_ok());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let spec = SyntheticSpec {
            n_prompts: 8,
            family: MeaningFamily::Dirichlet { concentration: 1.0 },
            meanings_min: 2,
            meanings_max: 4,
            split: SplitRule::Even {
                sequences_per_meaning: 2,
            },
            pool_size: 10,
            label_threshold: None,
        };
        let (records, _) = generate_synthetic(&spec, 11).unwrap();
        write_dataset(&path, &records).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.len(), records.len());
        for (a, b) in loaded.iter().zip(&records) {
            assert_eq!(a.prompt_id, b.prompt_id);
            assert_eq!(a.samples, b.samples);
            assert_eq!(a.label, b.label);
            assert_eq!(a.true_se, b.true_se);
        }
    }

    #[test]
    fn load_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"prompt_id\": \"x\"\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn load_rejects_duplicate_prompt_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        let r = record(vec![sample("a", 0, -1.0)]);
        let line = serde_json::to_string(&r).unwrap();
        std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate prompt_id"));
    }

    #[test]
    fn version_defaults_to_one() {
        let line = r#"{"prompt_id":"v","samples":[{"text":"a","meaning":0,"log_prob":-1.0,"log_prob_len_norm":-0.2}],"low_temp_log_prob":-0.1,"p_true":0.5,"label":0}"#;
        let r: PromptRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.version, 1);
    }

    #[test]
    fn subsample_is_deterministic_and_order_free() {
        let r = record(vec![
            sample("a", 0, -1.0),
            sample("b", 1, -2.0),
            sample("c", 2, -3.0),
        ])
        .normalize()
        .unwrap();
        let b1 = subsample(&r, 5, 42).unwrap();
        let b2 = subsample(&r, 5, 42).unwrap();
        assert_eq!(b1.records, b2.records);
        assert_eq!(b1.mc_seed, b2.mc_seed);
        let b3 = subsample(&r, 5, 43).unwrap();
        assert!(b1.records != b3.records || b1.mc_seed != b3.mc_seed);
        // Different n gives an unrelated stream, not a prefix.
        let b4 = subsample(&r, 6, 42).unwrap();
        assert_ne!(b1.records, b4.records[..5].to_vec());
    }

    #[test]
    fn subsample_draws_uniformly() {
        let r = record(vec![
            sample("a", 0, -1.0),
            sample("b", 1, -2.0),
            sample("c", 2, -3.0),
            sample("d", 3, -4.0),
        ])
        .normalize()
        .unwrap();
        let mut counts = [0u32; 4];
        let n = 40_000;
        let b = subsample(&r, n, 7).unwrap();
        for s in &b.records {
            counts[s.meaning as usize] += 1;
        }
        // Each cell is Binomial(n, 1/4): SE ~ 0.00217, allow 4 SE.
        for &c in &counts {
            assert_relative_eq!(c as f64 / n as f64, 0.25, epsilon = 4.0 * 0.00217);
        }
    }

    #[test]
    fn count_meanings_example() {
        let b = vec![
            sample("a", 0, -1.0),
            sample("b", 1, -2.0),
            sample("c", 0, -1.5),
            sample("d", 2, -2.5),
            sample("e", 0, -3.0),
        ];
        let counts = count_meanings(&b);
        assert_eq!(counts.get(&0), Some(&3));
        assert_eq!(counts.get(&1), Some(&1));
        assert_eq!(counts.get(&2), Some(&1));
        assert_eq!(counts.len(), 3);
    }

    #[test]
    fn synthetic_fixed_family_has_exact_true_se() {
        let spec = SyntheticSpec {
            n_prompts: 3,
            family: MeaningFamily::Fixed {
                probs: vec![0.5, 0.5],
            },
            meanings_min: 2,
            meanings_max: 2,
            split: SplitRule::Even {
                sequences_per_meaning: 1,
            },
            pool_size: 20,
            label_threshold: Some(0.1),
        };
        let (records, ses) = generate_synthetic(&spec, 3).unwrap();
        for (&se, r) in ses.iter().zip(&records) {
            assert_relative_eq!(se, std::f64::consts::LN_2, epsilon = 1e-15);
            assert_eq!(r.true_se, Some(se));
            assert_eq!(r.label, 1);
            // One text per meaning: text probability equals the share.
            for s in &r.samples {
                assert_relative_eq!(s.log_prob, 0.5f64.ln(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn synthetic_single_meaning_has_zero_se() {
        let spec = SyntheticSpec {
            n_prompts: 2,
            family: MeaningFamily::Dirichlet { concentration: 1.0 },
            meanings_min: 1,
            meanings_max: 1,
            split: SplitRule::Even {
                sequences_per_meaning: 3,
            },
            pool_size: 15,
            label_threshold: Some(0.5),
        };
        let (records, ses) = generate_synthetic(&spec, 5).unwrap();
        for (&se, r) in ses.iter().zip(&records) {
            assert_eq!(se, 0.0);
            assert_eq!(r.label, 0);
            assert!(r.samples.iter().all(|s| s.meaning == 0));
        }
    }

    #[test]
    fn synthetic_is_deterministic_per_seed() {
        let spec = SyntheticSpec {
            n_prompts: 6,
            family: MeaningFamily::Zipf { exponent: 1.0 },
            meanings_min: 2,
            meanings_max: 5,
            split: SplitRule::Random { min: 1, max: 3 },
            pool_size: 12,
            label_threshold: None,
        };
        let (a, sa) = generate_synthetic(&spec, 99).unwrap();
        let (b, sb) = generate_synthetic(&spec, 99).unwrap();
        assert_eq!(sa, sb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.samples, y.samples);
            assert_eq!(x.p_true, y.p_true);
            assert_eq!(x.label, y.label);
        }
        let (c, _) = generate_synthetic(&spec, 100).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.samples != y.samples));
    }

    #[test]
    fn synthetic_median_threshold_balances_labels() {
        let spec = SyntheticSpec {
            n_prompts: 100,
            family: MeaningFamily::Dirichlet { concentration: 0.7 },
            meanings_min: 2,
            meanings_max: 6,
            split: SplitRule::Even {
                sequences_per_meaning: 2,
            },
            pool_size: 10,
            label_threshold: None,
        };
        let (records, _) = generate_synthetic(&spec, 21).unwrap();
        let pos: usize = records.iter().map(|r| r.label as usize).sum();
        assert!((40..=60).contains(&pos), "positives = {pos}");
    }

    #[test]
    fn synthetic_pool_tracks_meaning_shares() {
        // With one text per meaning and a big pool, empirical meaning
        // frequencies converge to the fixed shares.
        let spec = SyntheticSpec {
            n_prompts: 1,
            family: MeaningFamily::Fixed {
                probs: vec![0.7, 0.2, 0.1],
            },
            meanings_min: 3,
            meanings_max: 3,
            split: SplitRule::Even {
                sequences_per_meaning: 1,
            },
            pool_size: 50_000,
            label_threshold: Some(10.0),
        };
        let (records, _) = generate_synthetic(&spec, 8).unwrap();
        let counts = count_meanings(&records[0].samples);
        let n = records[0].samples.len() as f64;
        // Meanings are relabeled by first appearance, so compare the sorted
        // frequency multiset against the sorted shares.
        let mut freqs: Vec<f64> = counts.values().map(|&c| c as f64 / n).collect();
        freqs.sort_by(|a, b| b.total_cmp(a));
        for (&freq, &p) in freqs.iter().zip([0.7, 0.2, 0.1].iter()) {
            let se = (p * (1.0 - p) / n).sqrt();
            assert_relative_eq!(freq, p, epsilon = 4.0 * se);
        }
    }

    #[test]
    fn synthetic_split_mass_sums_to_share() {
        let spec = SyntheticSpec {
            n_prompts: 4,
            family: MeaningFamily::Dirichlet { concentration: 1.5 },
            meanings_min: 2,
            meanings_max: 4,
            split: SplitRule::Random { min: 2, max: 4 },
            pool_size: 400,
            label_threshold: None,
        };
        let (records, _) = generate_synthetic(&spec, 31).unwrap();
        for r in &records {
            let mut per_meaning: HashMap<u32, f64> = HashMap::new();
            let mut seen: HashMap<&str, ()> = HashMap::new();
            for s in &r.samples {
                if seen.insert(&s.text, ()).is_none() {
                    *per_meaning.entry(s.meaning).or_insert(0.0) += s.log_prob.exp();
                }
            }
            let total: f64 = per_meaning.values().sum();
            // Pool may miss rare texts, so mass can fall short but never over.
            assert!(total <= 1.0 + 1e-9, "total = {total}");
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
