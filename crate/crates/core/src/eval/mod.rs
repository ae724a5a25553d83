//! Precision-recall evaluation: curves, AP, best-F, fold aggregation and
//! report rendering.

mod metrics;
mod summary;
mod svg;

pub use metrics::{aggregate_folds, average_precision, best_f_over_thresholds, f_score, pr_curve, PrCurve, PrPoint};
pub use summary::{
    evaluate_dimension, fold_metrics, summarize, ClassFoldMetrics, ClassSummary, EvalSummary, FoldMetrics, MeanStd,
    ModelScorer, Scorer,
};
pub use svg::render_pr_panel;
