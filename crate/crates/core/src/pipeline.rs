//! End-to-end experiment: load or generate, scrub, split, (augment), train,
//! predict, evaluate, and write reports with a hashed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anonymize::{scrub_dataset, ScrubReport};
use crate::corpus::{generate_synthetic, CorpusSpec, Dataset, Dimension, DimensionDataset, Taxonomy};
use crate::error::{Error, Result};
use crate::eval::{evaluate_dimension, render_pr_panel, EvalSummary, ModelScorer, Scorer};
use crate::model::{train, EncoderBackend, HashingEncoder, LinearModel, PrecomputedEncoder, TrainConfig};
use crate::scalar::Real;
use crate::seed;
use crate::split::{stratified_kfold, verify_stratification, FoldAssignment, StratificationReport};

/// Trains one model per fold on the remaining folds and evaluates each on
/// its held-out fold. Fold `j` trains with seeds derived from `(cfg.seed, j)`.
pub fn cross_validate<T: Real>(
    view: &DimensionDataset,
    fa: &FoldAssignment,
    cfg: &TrainConfig,
    encoder: &dyn EncoderBackend<T>,
) -> Result<EvalSummary> {
    let mut models = Vec::with_capacity(fa.k);
    for j in 0..fa.k {
        let (train_idx, _) = fa.partition(view, j)?;
        let mut fold_cfg = cfg.clone();
        fold_cfg.seed = seed::indexed(cfg.seed, j as u64);
        if let Some(a) = fold_cfg.augment.as_mut() {
            a.seed = seed::indexed(a.seed, j as u64);
        }
        models.push(train(&view.subset(&train_idx), &fold_cfg, encoder)?);
    }
    let scorers: Vec<ModelScorer<'_, T>> = models
        .iter()
        .map(|m| ModelScorer {
            model: m,
            encoder,
            batch_size: cfg.batch_size_test,
        })
        .collect();
    let refs: Vec<&dyn Scorer<T>> = scorers.iter().map(|s| s as &dyn Scorer<T>).collect();
    evaluate_dimension(&refs, view, fa)
}

/// Evaluates untrained heads with random N(0, scale²) weights, one per fold.
pub fn baseline_evaluate<T: Real>(
    view: &DimensionDataset,
    fa: &FoldAssignment,
    scale: f64,
    seed: u64,
    batch_size: usize,
    encoder: &dyn EncoderBackend<T>,
) -> Result<EvalSummary> {
    let models = (0..fa.k)
        .map(|j| {
            LinearModel::random(
                view.dimension,
                view.classes.clone(),
                encoder.dim(),
                scale,
                &mut seed::rng(seed::indexed(seed, j as u64)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let scorers: Vec<ModelScorer<'_, T>> = models
        .iter()
        .map(|m| ModelScorer {
            model: m,
            encoder,
            batch_size,
        })
        .collect();
    let refs: Vec<&dyn Scorer<T>> = scorers.iter().map(|s| s as &dyn Scorer<T>).collect();
    evaluate_dimension(&refs, view, fa)
}

/// Corpus to generate: a named preset (`"reference"`) or a full spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusSource {
    Preset(String),
    Spec(CorpusSpec),
}

impl CorpusSource {
    pub fn resolve(&self, seed: u64) -> Result<CorpusSpec> {
        let mut spec = match self {
            CorpusSource::Preset(name) if name == "reference" => CorpusSpec::reference_statistics(seed),
            CorpusSource::Preset(name) => {
                return Err(Error::InvalidConfig(format!("unknown corpus preset {name:?}")))
            }
            CorpusSource::Spec(s) => s.clone(),
        };
        spec.seed = seed;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionTraining {
    pub fine_tune: TrainConfig,
    pub augmented: TrainConfig,
}

impl DimensionTraining {
    pub fn defaults(d: Dimension) -> Self {
        match d {
            Dimension::Subject => DimensionTraining {
                fine_tune: TrainConfig::subject_fine_tune(),
                augmented: TrainConfig::subject_augmented(),
            },
            Dimension::Criminality => DimensionTraining {
                fine_tune: TrainConfig::criminality_fine_tune(),
                augmented: TrainConfig::criminality_augmented(),
            },
            Dimension::Damage => DimensionTraining {
                fine_tune: TrainConfig::damage_fine_tune(),
                augmented: TrainConfig::damage_augmented(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub enabled: bool,
    /// Standard deviation of the random head weights.
    pub weight_scale: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            enabled: true,
            weight_scale: 0.01,
        }
    }
}

fn yes() -> bool {
    true
}

fn two() -> usize {
    2
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// JSONL dataset; mutually exclusive with `corpus`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub corpus: Option<CorpusSource>,
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
    /// Precomputed embeddings (JSONL id -> vector) used instead of hashing.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub scrub: bool,
    #[serde(default = "yes")]
    pub augment: bool,
    /// Empty means every dimension of the taxonomy.
    #[serde(default)]
    pub dimensions: Vec<Dimension>,
    #[serde(default = "two")]
    pub k_folds: usize,
    #[serde(default)]
    pub train: BTreeMap<Dimension, DimensionTraining>,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: None,
            corpus: Some(CorpusSource::Preset("reference".into())),
            taxonomy: None,
            embeddings: None,
            output_dir: default_out(),
            seed: 0,
            scrub: true,
            augment: true,
            dimensions: Vec::new(),
            k_folds: 2,
            train: BTreeMap::new(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; relative paths are taken from the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.dataset.as_mut().map(rebase);
        cfg.taxonomy.as_mut().map(rebase);
        cfg.embeddings.as_mut().map(rebase);
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn training_for(&self, d: Dimension) -> DimensionTraining {
        self.train.get(&d).cloned().unwrap_or_else(|| DimensionTraining::defaults(d))
    }

    fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.corpus) {
            (Some(_), Some(_)) => Err(Error::InvalidConfig("set either dataset or corpus, not both".into())),
            (None, None) => Err(Error::InvalidConfig("no dataset or corpus given".into())),
            _ => Ok(()),
        }?;
        if self.k_folds < 2 {
            return Err(Error::InvalidConfig(format!("k_folds {} < 2", self.k_folds)));
        }
        for d in &self.dimensions {
            let t = self.training_for(*d);
            t.fine_tune.validate()?;
            t.augmented.validate()?;
        }
        Ok(())
    }

    /// Hash of everything but the output directory, so the same experiment
    /// written to two places gets the same hash.
    fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&cfg).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub dimension: Dimension,
    pub n_reports: usize,
    pub stratification: StratificationReport,
    pub baseline: Option<EvalSummary>,
    pub fine_tuning: EvalSummary,
    pub augmentation: Option<EvalSummary>,
}

impl DimensionResult {
    /// (experiment name, summary) in reporting order.
    pub fn experiments(&self) -> Vec<(&'static str, &EvalSummary)> {
        let mut out = Vec::new();
        if let Some(b) = &self.baseline {
            out.push(("baseline", b));
        }
        out.push(("fine_tuning", &self.fine_tuning));
        if let Some(a) = &self.augmentation {
            out.push(("augmentation", a));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub k_folds: usize,
    pub scrubbed: bool,
    pub dimensions: Vec<DimensionResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub status: String,
    #[serde(default)]
    pub failed_stage: Option<String>,
    pub partial: bool,
    pub stages: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    stages: Vec<String>,
}

impl Writer {
    fn write(&mut self, name: &str, content: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(content)),
            bytes: content.len(),
        });
        Ok(())
    }

    fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub metrics: Metrics,
    pub manifest: Manifest,
    pub scrub_report: Option<ScrubReport>,
}

/// Table of mAP and F (mean ± std) per dimension and experiment.
pub fn table_csv(metrics: &Metrics) -> String {
    let mut s = String::from("dimension,experiment,map_mean,map_std,f_mean,f_std,map,f_score\n");
    for d in &metrics.dimensions {
        for (name, e) in d.experiments() {
            s.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.3} ± {:.3},{:.3} ± {:.3}\n",
                d.dimension.title(),
                name,
                e.map.mean,
                e.map.std,
                e.f_score.mean,
                e.f_score.std,
                e.map.mean,
                e.map.std,
                e.f_score.mean,
                e.f_score.std
            ));
        }
    }
    s
}

/// SVG panels keyed by file name, one per dimension, drawn from the most
/// specialized experiment available.
pub fn render_panels(metrics: &Metrics) -> Vec<(String, String)> {
    metrics
        .dimensions
        .iter()
        .map(|d| {
            let (name, summary) = *d.experiments().last().expect("fine_tuning always present");
            let title = format!("{} ({})", d.dimension.title(), name.replace('_', " "));
            (format!("pr_{}.svg", d.dimension.key()), render_pr_panel(summary, &title))
        })
        .collect()
}

fn load_stage(cfg: &PipelineConfig) -> Result<Dataset> {
    let taxonomy = match &cfg.taxonomy {
        Some(p) => Some(Taxonomy::load(p)?),
        None => None,
    };
    if let Some(path) = &cfg.dataset {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
            ));
        }
        return Dataset::load(path, taxonomy.unwrap_or_default());
    }
    let spec = cfg
        .corpus
        .as_ref()
        .expect("validated")
        .resolve(seed::substream(cfg.seed, "corpus"))?;
    let ds = generate_synthetic(&spec)?;
    match taxonomy {
        Some(t) => Dataset::new(t, ds.reports),
        None => Ok(ds),
    }
}

fn run_dimension<T: Real>(
    cfg: &PipelineConfig,
    ds: &Dataset,
    d: Dimension,
    embeddings: Option<&PrecomputedEncoder<T>>,
) -> Result<(DimensionResult, FoldAssignment)> {
    let view = ds.dimension_view(d).map_err(|e| e.in_stage("view"))?;
    let fa = stratified_kfold(&view, cfg.k_folds, seed::substream(cfg.seed, &format!("split/{d}")))
        .map_err(|e| e.in_stage("split"))?;
    let stratification = verify_stratification(&view, &fa).map_err(|e| e.in_stage("split"))?;
    let training = cfg.training_for(d);

    let run = |mut tc: TrainConfig, experiment: &str| -> Result<EvalSummary> {
        tc.seed = seed::substream(cfg.seed, &format!("train/{d}/{experiment}"));
        if let Some(a) = tc.augment.as_mut() {
            a.seed = seed::substream(cfg.seed, &format!("augment/{d}/{experiment}"));
        }
        match embeddings {
            Some(enc) => cross_validate(&view, &fa, &tc, enc),
            None => cross_validate(&view, &fa, &tc, &HashingEncoder::<T>::new(tc.feature_dim)?),
        }
    };

    let baseline = if cfg.baseline.enabled {
        let seed = seed::substream(cfg.seed, &format!("baseline/{d}"));
        let bs = training.fine_tune.batch_size_test;
        let summary = match embeddings {
            Some(enc) => baseline_evaluate(&view, &fa, cfg.baseline.weight_scale, seed, bs, enc),
            None => baseline_evaluate(
                &view,
                &fa,
                cfg.baseline.weight_scale,
                seed,
                bs,
                &HashingEncoder::<T>::new(training.fine_tune.feature_dim)?,
            ),
        };
        Some(summary.map_err(|e| e.in_stage("evaluate"))?)
    } else {
        None
    };
    let mut fine = training.fine_tune.clone();
    fine.augment = None;
    let fine_tuning = run(fine, "fine_tuning").map_err(|e| e.in_stage("train"))?;
    let augmentation = if cfg.augment {
        let aug = training.augmented.clone();
        if aug.augment.is_none() {
            return Err(Error::InvalidConfig(format!("{d}: augmented config lacks augment settings")).in_stage("augment"));
        }
        Some(run(aug, "augmentation").map_err(|e| e.in_stage("augment"))?)
    } else {
        None
    };
    let result = DimensionResult {
        dimension: d,
        n_reports: view.len(),
        stratification,
        baseline,
        fine_tuning,
        augmentation,
    };
    Ok((result, fa))
}

/// Runs every stage and writes `dataset.jsonl`, `scrub_report.json`,
/// `splits.json`, `metrics.json`, `metrics_<dimension>.json`, `table1.csv`,
/// `pr_<dimension>.svg` and `manifest.json` into the output directory.
///
/// On failure the manifest is still written, with `partial = true` and the
/// failing stage, and the stage error is returned.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e).in_stage("setup"))?;
    let mut w = Writer {
        dir: cfg.output_dir.clone(),
        artifacts: Vec::new(),
        stages: Vec::new(),
    };
    let result = run_stages(cfg, &mut w);
    let (status, failed_stage) = match &result {
        Ok(_) => ("ok".to_string(), None),
        Err(Error::Stage { stage, .. }) => ("failed".to_string(), Some(stage.to_string())),
        Err(_) => ("failed".to_string(), Some("unknown".to_string())),
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        partial: result.is_err(),
        status,
        failed_stage,
        stages: w.stages.clone(),
        artifacts: w.artifacts.clone(),
    };
    let path = cfg.output_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e).in_stage("manifest"))?;
    let (metrics, scrub_report) = result?;
    Ok(RunOutcome {
        metrics,
        manifest,
        scrub_report,
    })
}

fn run_stages(cfg: &PipelineConfig, w: &mut Writer) -> Result<(Metrics, Option<ScrubReport>)> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let mut ds = load_stage(cfg).map_err(|e| e.in_stage("load"))?;
    w.stages.push("load".into());

    let scrub_report = if cfg.scrub {
        let (scrubbed, report) = scrub_dataset(&ds);
        ds = scrubbed;
        w.write_json("scrub_report.json", &report.counts).map_err(|e| e.in_stage("scrub"))?;
        w.stages.push("scrub".into());
        Some(report)
    } else {
        None
    };
    w.write("dataset.jsonl", ds.to_jsonl().as_bytes()).map_err(|e| e.in_stage("load"))?;

    let embeddings = match &cfg.embeddings {
        Some(p) => Some(PrecomputedEncoder::<f64>::load(p).map_err(|e| e.in_stage("load"))?),
        None => None,
    };
    let dims: Vec<Dimension> = if cfg.dimensions.is_empty() {
        ds.taxonomy.dimensions().collect()
    } else {
        cfg.dimensions.clone()
    };
    let mut results = Vec::new();
    let mut splits = BTreeMap::new();
    for d in dims {
        let (r, fa) = run_dimension::<f64>(cfg, &ds, d, embeddings.as_ref())?;
        splits.insert(d.key().to_string(), fa);
        results.push(r);
    }
    w.stages.extend(["split", "train", "evaluate"].map(String::from));
    w.write_json("splits.json", &splits).map_err(|e| e.in_stage("split"))?;

    let metrics = Metrics {
        seed: cfg.seed,
        k_folds: cfg.k_folds,
        scrubbed: cfg.scrub,
        dimensions: results,
    };
    let report = |e: Error| e.in_stage("report");
    w.write_json("metrics.json", &metrics).map_err(report)?;
    for d in &metrics.dimensions {
        w.write_json(&format!("metrics_{}.json", d.dimension.key()), d).map_err(report)?;
    }
    w.write("table1.csv", table_csv(&metrics).as_bytes()).map_err(report)?;
    for (name, svg) in render_panels(&metrics) {
        w.write(&name, svg.as_bytes()).map_err(report)?;
    }
    w.stages.push("report".into());
    Ok((metrics, scrub_report))
}
