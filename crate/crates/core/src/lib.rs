//! Multilabel triage of complaint reports across three annotation dimensions
//! (Subject, Degree of Criminality, Damage).
//!
//! The crate covers the whole experimental loop: corpus loading or synthetic
//! generation, PII scrubbing, stratified k-fold splitting, word-deletion
//! augmentation, a linear sigmoid classifier trained with binary cross-entropy,
//! and precision-recall evaluation (AP, mAP, best-F) with fold aggregation.
//!
//! Numeric code is generic over the scalar type. Metric routines accept any
//! [`Scalar`] (including the exact [`Rational`] type), while the classifier
//! needs a [`Real`] (`f32` or `f64`). The aliases below fix `f64` for the
//! common case.

pub mod anonymize;
pub mod augment;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hypersearch;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod split;

pub use error::{Error, Result};
pub use scalar::{Rational, Real, Scalar};

/// Classifier with `f64` parameters.
pub type LinearModel = model::LinearModel<f64>;
/// Sigmoid score matrix with `f64` entries.
pub type ScoreMatrix = model::ScoreMatrix<f64>;
/// Precision-recall curve over `f64` scores.
pub type PrCurve = eval::PrCurve<f64>;
/// Sparse feature vector with `f64` values.
pub type SparseVector = model::SparseVector<f64>;
/// Hashed term-frequency encoder producing `f64` features.
pub type HashingEncoder = model::HashingEncoder<f64>;
