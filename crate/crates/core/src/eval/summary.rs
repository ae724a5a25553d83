use serde::{Deserialize, Serialize};

use super::metrics::{aggregate_folds, average_precision, best_f_over_thresholds, pr_curve, PrCurve};
use crate::corpus::{Dimension, DimensionDataset, LabelMatrix};
use crate::error::{Error, Result};
use crate::model::{predict, EncoderBackend, LinearModel, ScoreMatrix};
use crate::scalar::Real;
use crate::split::FoldAssignment;

/// Anything that assigns per-class scores to the items of a view.
pub trait Scorer<T> {
    fn score(&self, view: &DimensionDataset) -> Result<ScoreMatrix<T>>;
}

/// A trained model paired with its encoder.
pub struct ModelScorer<'a, T> {
    pub model: &'a LinearModel<T>,
    pub encoder: &'a dyn EncoderBackend<T>,
    pub batch_size: usize,
}

impl<T: Real> Scorer<T> for ModelScorer<'_, T> {
    fn score(&self, view: &DimensionDataset) -> Result<ScoreMatrix<T>> {
        predict(self.model, self.encoder, view, self.batch_size)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        match values.len() {
            0 => None,
            1 => Some(MeanStd { mean: values[0], std: 0.0 }),
            _ => aggregate_folds(values).ok().map(|(mean, std)| MeanStd { mean, std }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFoldMetrics {
    pub class: String,
    pub positives: usize,
    /// Positive rate in the test fold; the AP of a constant scorer.
    pub prevalence: f64,
    /// `None` when the fold has no positives for the class.
    pub ap: Option<f64>,
    pub best_f: Option<f64>,
    pub threshold: Option<f64>,
    pub curve: Option<PrCurve<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    /// Mean AP over classes with at least one positive.
    pub map: f64,
    /// Mean best-F over the same classes.
    pub macro_f: f64,
    pub classes: Vec<ClassFoldMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub ap: Option<MeanStd>,
    pub best_f: Option<MeanStd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub dimension: Dimension,
    pub classes: Vec<String>,
    pub folds: Vec<FoldMetrics>,
    pub per_class: Vec<ClassSummary>,
    pub map: MeanStd,
    pub f_score: MeanStd,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Metrics of one fold from its scores and ground truth.
pub fn fold_metrics<T: Real>(
    fold: usize,
    classes: &[String],
    scores: &ScoreMatrix<T>,
    labels: &LabelMatrix,
    warnings: &mut Vec<String>,
) -> Result<FoldMetrics> {
    if scores.rows() != labels.rows() || scores.cols() != labels.cols() || classes.len() != labels.cols() {
        return Err(Error::DimensionMismatch {
            expected: labels.rows() * labels.cols(),
            actual: scores.rows() * scores.cols(),
        });
    }
    let n = labels.rows();
    let mut out = Vec::with_capacity(classes.len());
    for (c, class) in classes.iter().enumerate() {
        let y = labels.column(c);
        let s: Vec<f64> = scores.column(c).into_iter().map(|v| v.to_f64()).collect();
        let positives = y.iter().filter(|&&v| v).count();
        let prevalence = if n == 0 { 0.0 } else { positives as f64 / n as f64 };
        if positives == 0 {
            let msg = format!("fold {fold}: class {class:?} has no test positives; excluded from mAP");
            log::warn!("{msg}");
            warnings.push(msg);
            out.push(ClassFoldMetrics {
                class: class.clone(),
                positives,
                prevalence,
                ap: None,
                best_f: None,
                threshold: None,
                curve: None,
            });
            continue;
        }
        let (threshold, best_f) = best_f_over_thresholds(&s, &y)?;
        out.push(ClassFoldMetrics {
            class: class.clone(),
            positives,
            prevalence,
            ap: Some(average_precision(&s, &y)?),
            best_f: Some(best_f),
            threshold: Some(threshold),
            curve: Some(pr_curve(&s, &y)?),
        });
    }
    let aps: Vec<f64> = out.iter().filter_map(|m| m.ap).collect();
    let fs: Vec<f64> = out.iter().filter_map(|m| m.best_f).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    if aps.is_empty() {
        let msg = format!("fold {fold}: no class has test positives");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(FoldMetrics {
        fold,
        n_test: n,
        map: mean(&aps),
        macro_f: mean(&fs),
        classes: out,
    })
}

/// Aggregates per-fold metrics into a summary.
pub fn summarize(
    dimension: Dimension,
    classes: &[String],
    folds: Vec<FoldMetrics>,
    warnings: Vec<String>,
) -> Result<EvalSummary> {
    let maps: Vec<f64> = folds.iter().map(|f| f.map).collect();
    let fs: Vec<f64> = folds.iter().map(|f| f.macro_f).collect();
    let (map_mean, map_std) = aggregate_folds(&maps)?;
    let (f_mean, f_std) = aggregate_folds(&fs)?;
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(c, class)| {
            let aps: Vec<f64> = folds.iter().filter_map(|f| f.classes[c].ap).collect();
            let bfs: Vec<f64> = folds.iter().filter_map(|f| f.classes[c].best_f).collect();
            ClassSummary {
                class: class.clone(),
                ap: MeanStd::of(&aps),
                best_f: MeanStd::of(&bfs),
            }
        })
        .collect();
    Ok(EvalSummary {
        dimension,
        classes: classes.to_vec(),
        folds,
        per_class,
        map: MeanStd { mean: map_mean, std: map_std },
        f_score: MeanStd { mean: f_mean, std: f_std },
        warnings,
    })
}

/// Scores fold `j` of `view` with `scorers[j]` (which must have been fit on
/// the other folds only) and aggregates across folds.
pub fn evaluate_dimension<T: Real>(
    scorers: &[&dyn Scorer<T>],
    view: &DimensionDataset,
    fa: &FoldAssignment,
) -> Result<EvalSummary> {
    if scorers.len() != fa.k {
        return Err(Error::InvalidConfig(format!(
            "{} scorers for {} folds",
            scorers.len(),
            fa.k
        )));
    }
    let mut warnings = Vec::new();
    let mut folds = Vec::with_capacity(fa.k);
    for (j, scorer) in scorers.iter().enumerate() {
        let (_, test) = fa.partition(view, j)?;
        let test_view = view.subset(&test);
        let scores = scorer.score(&test_view)?;
        folds.push(fold_metrics(j, &view.classes, &scores, &test_view.label_matrix(), &mut warnings)?);
    }
    summarize(view.dimension, &view.classes, folds, warnings)
}
