use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use triage::anonymize::scrub_dataset;
use triage::augment::{augment_dataset, AugmentConfig};
use triage::corpus::{generate_synthetic, reports_to_jsonl, CorpusSpec, Dataset, Dimension, Taxonomy};
use triage::eval::{evaluate_dimension, ModelScorer, Scorer};
use triage::hypersearch::{random_search, SearchOptions, SearchSpace};
use triage::model::{train, HashingEncoder, TrainConfig};
use triage::pipeline::{
    cross_validate, render_panels, run_pipeline, table_csv, CorpusSource, DimensionResult, Metrics, PipelineConfig,
};
use triage::seed;
use triage::split::{stratified_kfold, verify_stratification, FoldAssignment};
use triage::LinearModel;

#[derive(Parser)]
#[command(name = "triage", version, about = "Multilabel triage of abuse reports: scrub, split, train, evaluate")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    dimension: Option<DimArg>,
    #[arg(long, global = true)]
    no_scrub: bool,
    #[arg(long, global = true)]
    no_augment: bool,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DimArg {
    Subject,
    Criminality,
    Damage,
    All,
}

impl DimArg {
    fn dimension(self) -> Option<Dimension> {
        match self {
            DimArg::Subject => Some(Dimension::Subject),
            DimArg::Criminality => Some(Dimension::Criminality),
            DimArg::Damage => Some(Dimension::Damage),
            DimArg::All => None,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Input dataset (JSONL). Defaults to the config's dataset or corpus.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Taxonomy (JSON). Defaults to the built-in class lists.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    Generate {
        /// Corpus spec (JSON) or the preset name `reference`.
        #[arg(long)]
        spec: Option<String>,
    },
    /// Replace emails, URLs, phone numbers and ID numbers with placeholders.
    Scrub {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, short)]
        output: PathBuf,
        /// Write the scrub report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Expand one dimension's view with word-deletion copies.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, short)]
        output: PathBuf,
        /// Word deletion rate.
        #[arg(long)]
        adr: Option<f64>,
        /// Augmentation factor (output size over input size).
        #[arg(long)]
        af: Option<f64>,
    },
    /// Stratified k-fold split per dimension.
    Split {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: Option<usize>,
        /// Defaults to `<out>/splits.json`.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Train one dimension's classifier.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Training config (JSON); defaults to the dimension's preset.
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// Use the augmented preset instead of the fine-tuning one.
        #[arg(long)]
        augmented: bool,
        /// Split file from `split`; with `--fold`, trains on the other folds.
        #[arg(long, requires = "fold")]
        split: Option<PathBuf>,
        #[arg(long, requires = "split")]
        fold: Option<usize>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Cross-validated evaluation; writes metrics.json, table1.csv and PR panels.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Split file; fold j is scored with the j-th `--model`.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// Random hyperparameter search for one dimension.
    Search {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        trials: Option<usize>,
        /// Search space (JSON).
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Full pipeline from the config.
    Run,
    /// Re-render table1.csv and PR panels from a saved metrics.json.
    Report {
        #[arg(long)]
        metrics: PathBuf,
    },
}

struct Ctx {
    cfg: PipelineConfig,
    dimension: Option<DimArg>,
    jobs: usize,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self> {
        let mut cfg = match &g.config {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("stage config: {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        if let Some(o) = &g.out {
            cfg.output_dir = o.clone();
        }
        if let Some(d) = g.dimension {
            cfg.dimensions = d.dimension().into_iter().collect();
        }
        if g.no_scrub {
            cfg.scrub = false;
        }
        if g.no_augment {
            cfg.augment = false;
        }
        Ok(Ctx {
            cfg,
            dimension: g.dimension,
            jobs: g.jobs.unwrap_or(1),
        })
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.cfg.output_dir)
            .with_context(|| format!("creating {}", self.cfg.output_dir.display()))?;
        Ok(self.cfg.output_dir.join(name))
    }

    fn taxonomy(&self, data: &DataArgs) -> Result<Option<Taxonomy>> {
        match data.taxonomy.as_ref().or(self.cfg.taxonomy.as_ref()) {
            Some(p) => Ok(Some(Taxonomy::load(p)?)),
            None => Ok(None),
        }
    }

    fn dataset(&self, data: &DataArgs) -> Result<Dataset> {
        let taxonomy = self.taxonomy(data)?;
        if let Some(p) = data.input.as_ref().or(self.cfg.dataset.as_ref()) {
            return Dataset::load(p, taxonomy.unwrap_or_default())
                .with_context(|| format!("stage load: {}", p.display()));
        }
        let source = self.cfg.corpus.clone().unwrap_or(CorpusSource::Preset("reference".into()));
        let ds = generate_synthetic(&source.resolve(seed::substream(self.cfg.seed, "corpus"))?)?;
        Ok(match taxonomy {
            Some(t) => Dataset::new(t, ds.reports)?,
            None => ds,
        })
    }

    fn dimensions(&self, ds: &Dataset) -> Vec<Dimension> {
        if self.cfg.dimensions.is_empty() {
            ds.taxonomy.dimensions().collect()
        } else {
            self.cfg.dimensions.clone()
        }
    }

    fn single_dimension(&self) -> Result<Dimension> {
        match self.dimension.and_then(DimArg::dimension) {
            Some(d) => Ok(d),
            None => bail!("this command needs --dimension subject|criminality|damage"),
        }
    }

    fn split_seed(&self, d: Dimension) -> u64 {
        seed::substream(self.cfg.seed, &format!("split/{d}"))
    }
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_reports(ctx: &Ctx, metrics: &Metrics) -> Result<()> {
    write_json(&ctx.out("metrics.json")?, metrics)?;
    fs::write(ctx.out("table1.csv")?, table_csv(metrics))?;
    for (name, svg) in render_panels(metrics) {
        fs::write(ctx.out(&name)?, svg)?;
    }
    Ok(())
}

fn generate(ctx: &Ctx, spec: Option<&str>) -> Result<()> {
    let source = match spec {
        Some("reference") => CorpusSource::Preset("reference".into()),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            CorpusSource::Spec(serde_json::from_str::<CorpusSpec>(&text)?)
        }
        None => ctx.cfg.corpus.clone().unwrap_or(CorpusSource::Preset("reference".into())),
    };
    let ds = generate_synthetic(&source.resolve(seed::substream(ctx.cfg.seed, "corpus"))?)?;
    ds.save(&ctx.out("dataset.jsonl")?)?;
    fs::write(ctx.out("taxonomy.json")?, ds.taxonomy.to_json())?;
    log::info!("generated {} reports into {}", ds.len(), ctx.cfg.output_dir.display());
    Ok(())
}

fn scrub(ctx: &Ctx, data: &DataArgs, output: &Path, report: Option<&Path>) -> Result<()> {
    let ds = ctx.dataset(data)?;
    let (scrubbed, rep) = scrub_dataset(&ds);
    scrubbed.save(output)?;
    match report {
        Some(p) => write_json(p, &rep)?,
        None => println!("{}", serde_json::to_string_pretty(&rep.counts)?),
    }
    Ok(())
}

fn augment(ctx: &Ctx, data: &DataArgs, output: &Path, adr: Option<f64>, af: Option<f64>) -> Result<()> {
    let d = ctx.single_dimension()?;
    let ds = ctx.dataset(data)?;
    let preset = ctx.cfg.training_for(d).augmented.augment.unwrap_or(AugmentConfig {
        adr: 0.1,
        af: 2.0,
        seed: 0,
    });
    let cfg = AugmentConfig {
        adr: adr.unwrap_or(preset.adr),
        af: af.unwrap_or(preset.af),
        seed: seed::substream(ctx.cfg.seed, &format!("augment/{d}")),
    };
    let view = augment_dataset(&ds.dimension_view(d)?, &cfg)?;
    fs::write(output, reports_to_jsonl(&view.to_reports()))?;
    log::info!("{} items written to {}", view.len(), output.display());
    Ok(())
}

fn split(ctx: &Ctx, data: &DataArgs, k: Option<usize>, output: Option<&Path>) -> Result<()> {
    let ds = ctx.dataset(data)?;
    let k = k.unwrap_or(ctx.cfg.k_folds);
    let mut splits = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for d in ctx.dimensions(&ds) {
        let view = ds.dimension_view(d)?;
        let fa = stratified_kfold(&view, k, ctx.split_seed(d))?;
        reports.insert(d.key().to_string(), verify_stratification(&view, &fa)?);
        splits.insert(d.key().to_string(), fa);
    }
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => ctx.out("splits.json")?,
    };
    write_json(&path, &splits)?;
    println!("{}", serde_json::to_string_pretty(&reports)?);
    Ok(())
}

fn read_split(path: &Path, d: Dimension) -> Result<FoldAssignment> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut all: BTreeMap<String, FoldAssignment> = serde_json::from_str(&text)?;
    all.remove(d.key())
        .with_context(|| format!("{} has no split for {}", path.display(), d.key()))
}

fn train_config(ctx: &Ctx, d: Dimension, path: Option<&Path>, augmented: bool) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => {
            let t = ctx.cfg.training_for(d);
            if augmented && ctx.cfg.augment {
                t.augmented
            } else {
                TrainConfig { augment: None, ..t.fine_tune }
            }
        }
    };
    cfg.seed = seed::substream(ctx.cfg.seed, &format!("train/{d}"));
    if let Some(a) = cfg.augment.as_mut() {
        a.seed = seed::substream(ctx.cfg.seed, &format!("augment/{d}"));
    }
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(
    ctx: &Ctx,
    data: &DataArgs,
    cfg_path: Option<&Path>,
    augmented: bool,
    split: Option<&Path>,
    fold: Option<usize>,
    output: &Path,
) -> Result<()> {
    let d = ctx.single_dimension()?;
    let ds = ctx.dataset(data)?;
    let mut view = ds.dimension_view(d)?;
    if let (Some(p), Some(j)) = (split, fold) {
        let fa = read_split(p, d)?;
        let (train_idx, _) = fa.partition(&view, j)?;
        view = view.subset(&train_idx);
    }
    let cfg = train_config(ctx, d, cfg_path, augmented)?;
    let model = train(&view, &cfg, &HashingEncoder::<f64>::new(cfg.feature_dim)?)?;
    model.save(output)?;
    log::info!("model for {d} trained on {} items", view.len());
    Ok(())
}

fn evaluate(ctx: &Ctx, data: &DataArgs, split: Option<&Path>, models: &[PathBuf]) -> Result<()> {
    let ds = ctx.dataset(data)?;
    let mut results = Vec::new();
    if !models.is_empty() {
        let d = ctx.single_dimension()?;
        let view = ds.dimension_view(d)?;
        let fa = match split {
            Some(p) => read_split(p, d)?,
            None => bail!("--model requires --split"),
        };
        let loaded = models
            .iter()
            .map(|p| LinearModel::load(p).with_context(|| format!("loading {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        let encoders = loaded
            .iter()
            .map(|m| HashingEncoder::<f64>::new(m.feature_dim))
            .collect::<triage::Result<Vec<_>>>()?;
        let scorers: Vec<ModelScorer<'_, f64>> = loaded
            .iter()
            .zip(&encoders)
            .map(|(model, encoder)| ModelScorer {
                model,
                encoder,
                batch_size: model.config.as_ref().map_or(64, |c| c.batch_size_test),
            })
            .collect();
        let refs: Vec<&dyn Scorer<f64>> = scorers.iter().map(|s| s as &dyn Scorer<f64>).collect();
        let summary = evaluate_dimension(&refs, &view, &fa)?;
        results.push(DimensionResult {
            dimension: d,
            n_reports: view.len(),
            stratification: verify_stratification(&view, &fa)?,
            baseline: None,
            fine_tuning: summary,
            augmentation: None,
        });
    } else {
        for d in ctx.dimensions(&ds) {
            let view = ds.dimension_view(d)?;
            let fa = match split {
                Some(p) => read_split(p, d)?,
                None => stratified_kfold(&view, ctx.cfg.k_folds, ctx.split_seed(d))?,
            };
            let cfg = train_config(ctx, d, None, false)?;
            let fine = cross_validate(&view, &fa, &cfg, &HashingEncoder::<f64>::new(cfg.feature_dim)?)?;
            let augmentation = if ctx.cfg.augment {
                let cfg = train_config(ctx, d, None, true)?;
                Some(cross_validate(&view, &fa, &cfg, &HashingEncoder::<f64>::new(cfg.feature_dim)?)?)
            } else {
                None
            };
            results.push(DimensionResult {
                dimension: d,
                n_reports: view.len(),
                stratification: verify_stratification(&view, &fa)?,
                baseline: None,
                fine_tuning: fine,
                augmentation,
            });
        }
    }
    let metrics = Metrics {
        seed: ctx.cfg.seed,
        k_folds: results.first().map_or(ctx.cfg.k_folds, |r| r.fine_tuning.folds.len()),
        scrubbed: ds.reports.iter().any(|r| r.scrubbed),
        dimensions: results,
    };
    write_reports(ctx, &metrics)?;
    print!("{}", table_csv(&metrics));
    Ok(())
}

fn search(ctx: &Ctx, data: &DataArgs, trials: Option<usize>, space: Option<&Path>, k: Option<usize>) -> Result<()> {
    let d = ctx.single_dimension()?;
    let ds = ctx.dataset(data)?;
    let mut space = match space {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None if ctx.cfg.augment => SearchSpace::default(),
        None => SearchSpace::without_augmentation(),
    };
    if let Some(n) = trials {
        space.n_trials = n;
    }
    space.seed = seed::substream(ctx.cfg.seed, &format!("search/{d}"));
    let opts = SearchOptions {
        log_path: Some(ctx.out(&format!("trials_{}.jsonl", d.key()))?),
        jobs: ctx.jobs,
    };
    let outcome = random_search(
        &ds.dimension_view(d)?,
        &space,
        k.unwrap_or(ctx.cfg.k_folds),
        ctx.split_seed(d),
        &opts,
    )?;
    write_json(&ctx.out(&format!("best_{}.json", d.key()))?, &outcome.best)?;
    println!(
        "best trial {} of {}: mAP {:.4}",
        outcome.best_trial,
        outcome.trials.len(),
        outcome.best_map
    );
    Ok(())
}

fn report(ctx: &Ctx, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let metrics: Metrics = serde_json::from_str(&text)?;
    fs::write(ctx.out("table1.csv")?, table_csv(&metrics))?;
    for (name, svg) in render_panels(&metrics) {
        fs::write(ctx.out(&name)?, svg)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli.global)?;
    if let Some(n) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    match &cli.command {
        Command::Generate { spec } => generate(&ctx, spec.as_deref()),
        Command::Scrub { data, output, report } => scrub(&ctx, data, output, report.as_deref()),
        Command::Augment { data, output, adr, af } => augment(&ctx, data, output, *adr, *af),
        Command::Split { data, k, output } => split(&ctx, data, *k, output.as_deref()),
        Command::Train {
            data,
            train_config,
            augmented,
            split,
            fold,
            output,
        } => train_cmd(&ctx, data, train_config.as_deref(), *augmented, split.as_deref(), *fold, output),
        Command::Evaluate { data, split, models } => evaluate(&ctx, data, split.as_deref(), models),
        Command::Search { data, trials, space, k } => search(&ctx, data, *trials, space.as_deref(), *k),
        Command::Run => {
            let outcome = run_pipeline(&ctx.cfg)?;
            print!("{}", table_csv(&outcome.metrics));
            Ok(())
        }
        Command::Report { metrics } => report(&ctx, metrics),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
