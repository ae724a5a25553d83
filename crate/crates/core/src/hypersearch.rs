//! Random search over training and augmentation hyperparameters, scored by
//! fold-mean mAP.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::corpus::DimensionDataset;
use crate::error::{Error, Result};
use crate::model::{HashingEncoder, TrainConfig};
use crate::pipeline::cross_validate;
use crate::seed;
use crate::split::{stratified_kfold, FoldAssignment};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub low: T,
    pub high: T,
}

impl<T: PartialOrd + std::fmt::Debug> Bounds<T> {
    fn check(&self, name: &str) -> Result<()> {
        if self.low < self.high {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("{name}: low {:?} must be < high {:?}", self.low, self.high)))
        }
    }
}

fn b<T>(low: T, high: T) -> Bounds<T> {
    Bounds { low, high }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Sampled log-uniformly.
    pub learning_rate: Bounds<f64>,
    pub epochs: Bounds<usize>,
    pub batch_size_train: Bounds<usize>,
    pub batch_size_test: Bounds<usize>,
    pub dropout: Bounds<f64>,
    /// Augmentation is searched only when both `adr` and `af` are set.
    #[serde(default)]
    pub adr: Option<Bounds<f64>>,
    #[serde(default)]
    pub af: Option<Bounds<f64>>,
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
}

fn default_feature_dim() -> usize {
    4096
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: b(1e-6, 1e-4),
            epochs: b(10, 200),
            batch_size_train: b(16, 256),
            batch_size_test: b(16, 256),
            dropout: b(0.1, 0.5),
            adr: Some(b(0.05, 0.9)),
            af: Some(b(1.0, 10.0)),
            n_trials: 50,
            seed: 0,
            feature_dim: default_feature_dim(),
        }
    }
}

impl SearchSpace {
    pub fn without_augmentation() -> Self {
        SearchSpace {
            adr: None,
            af: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learning_rate.check("learning_rate")?;
        if self.learning_rate.low <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate bounds must be positive".into()));
        }
        self.epochs.check("epochs")?;
        self.batch_size_train.check("batch_size_train")?;
        self.batch_size_test.check("batch_size_test")?;
        self.dropout.check("dropout")?;
        if self.epochs.low == 0 || self.batch_size_train.low == 0 || self.batch_size_test.low == 0 {
            return Err(Error::InvalidConfig("integer bounds must start at >= 1".into()));
        }
        if self.dropout.low < 0.0 || self.dropout.high >= 1.0 {
            return Err(Error::InvalidConfig("dropout bounds must lie in [0, 1)".into()));
        }
        if let Some(a) = &self.adr {
            a.check("adr")?;
            if a.low <= 0.0 || a.high >= 1.0 {
                return Err(Error::InvalidConfig("adr bounds must lie in (0, 1)".into()));
            }
        }
        if let Some(a) = &self.af {
            a.check("af")?;
            if a.low < 1.0 {
                return Err(Error::InvalidConfig("af bounds must be >= 1".into()));
            }
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Configuration of trial `trial_index`, a pure function of
/// `(space.seed, trial_index)`.
pub fn sample_config(space: &SearchSpace, trial_index: usize) -> Result<TrainConfig> {
    if trial_index >= space.n_trials {
        return Err(Error::OutOfRange {
            index: trial_index,
            len: space.n_trials,
        });
    }
    let trial_seed = seed::indexed(space.seed, trial_index as u64);
    let mut rng = seed::rng(trial_seed);
    let (lo, hi) = (space.learning_rate.low.ln(), space.learning_rate.high.ln());
    let learning_rate = rng.random_range(lo..=hi).exp();
    let epochs = rng.random_range(space.epochs.low..=space.epochs.high);
    let batch_size_train = rng.random_range(space.batch_size_train.low..=space.batch_size_train.high);
    let batch_size_test = rng.random_range(space.batch_size_test.low..=space.batch_size_test.high);
    let dropout = rng.random_range(space.dropout.low..=space.dropout.high);
    let augment = match (&space.adr, &space.af) {
        (Some(adr), Some(af)) => Some(AugmentConfig {
            adr: rng.random_range(adr.low..=adr.high),
            af: rng.random_range(af.low..=af.high),
            seed: seed::substream(trial_seed, "augment"),
        }),
        _ => None,
    };
    Ok(TrainConfig {
        learning_rate,
        epochs,
        batch_size_train,
        batch_size_test,
        dropout,
        feature_dim: space.feature_dim,
        seed: seed::substream(trial_seed, "train"),
        augment,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// One line of the trial log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: TrainConfig,
    pub status: TrialStatus,
    #[serde(default)]
    pub fold_map: Vec<f64>,
    #[serde(default)]
    pub fold_f: Vec<f64>,
    pub map: Option<f64>,
    pub f_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    /// Trial log (JSONL). Existing records are reused so an interrupted
    /// search resumes where it stopped.
    pub log_path: Option<PathBuf>,
    /// Trials evaluated concurrently; 0 or 1 means sequential.
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best_trial: usize,
    pub best: TrainConfig,
    pub best_map: f64,
    pub trials: Vec<TrialRecord>,
}

fn run_trial(view: &DimensionDataset, fa: &FoldAssignment, trial: usize, config: TrainConfig) -> TrialRecord {
    let result = HashingEncoder::<f64>::new(config.feature_dim).and_then(|enc| cross_validate(view, fa, &config, &enc));
    match result {
        Ok(summary) => TrialRecord {
            trial,
            fold_map: summary.folds.iter().map(|f| f.map).collect(),
            fold_f: summary.folds.iter().map(|f| f.macro_f).collect(),
            map: Some(summary.map.mean),
            f_score: Some(summary.f_score.mean),
            status: TrialStatus::Ok,
            error: None,
            config,
        },
        Err(e) => {
            log::warn!("trial {trial} failed: {e}");
            TrialRecord {
                trial,
                config,
                status: TrialStatus::Failed,
                fold_map: Vec::new(),
                fold_f: Vec::new(),
                map: None,
                f_score: None,
                error: Some(e.to_string()),
            }
        }
    }
}

fn read_log(path: &Path, space: &SearchSpace) -> Result<Vec<TrialRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}:{}: dropping unreadable trial record: {e}", path.display(), i + 1);
                break;
            }
        };
        if rec.trial != out.len() || rec.trial >= space.n_trials {
            break;
        }
        if rec.config != sample_config(space, rec.trial)? {
            return Err(Error::InvalidConfig(format!(
                "trial log {} was written for a different search space",
                path.display()
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Runs `space.n_trials` trials of k-fold training and evaluation on one
/// split of `view` (drawn from `split_seed`) and returns the trial with the
/// highest fold-mean mAP, earliest on ties. Failed trials stay in the log.
pub fn random_search(
    view: &DimensionDataset,
    space: &SearchSpace,
    k_folds: usize,
    split_seed: u64,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    space.validate()?;
    let fa = stratified_kfold(view, k_folds, split_seed)?;
    let mut trials = match &opts.log_path {
        Some(p) => read_log(p, space)?,
        None => Vec::new(),
    };
    if let Some(p) = &opts.log_path {
        // Rewrite the valid prefix so a torn final line is dropped.
        let mut text = String::new();
        for t in &trials {
            text.push_str(&serde_json::to_string(t)?);
            text.push('\n');
        }
        fs::write(p, text).map_err(|e| Error::io(p, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let chunk = opts.jobs.max(1);
    while trials.len() < space.n_trials {
        let start = trials.len();
        let end = (start + chunk).min(space.n_trials);
        let configs = (start..end)
            .map(|i| sample_config(space, i).map(|c| (i, c)))
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<TrialRecord> =
            pool.install(|| configs.into_par_iter().map(|(i, c)| run_trial(view, &fa, i, c)).collect());
        if let Some(p) = &opts.log_path {
            let mut f = OpenOptions::new().append(true).create(true).open(p).map_err(|e| Error::io(p, e))?;
            for t in &batch {
                writeln!(f, "{}", serde_json::to_string(t)?).map_err(|e| Error::io(p, e))?;
            }
        }
        trials.extend(batch);
    }
    let mut best: Option<(usize, f64)> = None;
    for t in &trials {
        if let Some(m) = t.map {
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((t.trial, m));
            }
        }
    }
    let (best_trial, best_map) = best.ok_or_else(|| Error::InvalidConfig("every trial failed".into()))?;
    Ok(SearchOutcome {
        best_trial,
        best: trials[best_trial].config.clone(),
        best_map,
        trials,
    })
}
