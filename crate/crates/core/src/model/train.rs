use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{EncoderBackend, SparseVector};
use super::linear::{Gradient, LinearModel, ScoreMatrix};
use crate::augment::{augment_dataset, AugmentConfig};
use crate::corpus::DimensionDataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

fn default_feature_dim() -> usize {
    4096
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size_train: usize,
    pub batch_size_test: usize,
    /// Input-feature dropout rate in `[0, 1)`.
    pub dropout: f64,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub augment: Option<AugmentConfig>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size_train == 0 || self.batch_size_test == 0 || self.feature_dim == 0 {
            return bad("epochs, batch sizes and feature_dim must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }

    /// Best fine-tuning settings reported for Subject.
    pub fn subject_fine_tune() -> Self {
        Self::table(1.217e-5, 144, 41, 68, 0.448, None)
    }

    pub fn criminality_fine_tune() -> Self {
        Self::table(4.634e-5, 116, 167, 39, 0.218, None)
    }

    pub fn damage_fine_tune() -> Self {
        Self::table(5.804e-5, 10, 54, 171, 0.485, None)
    }

    /// Best settings with augmentation reported for Subject.
    pub fn subject_augmented() -> Self {
        Self::table(3.569e-6, 140, 75, 212, 0.247, Some((0.098, 4.354)))
    }

    pub fn criminality_augmented() -> Self {
        Self::table(8.399e-6, 13, 221, 89, 0.435, Some((0.061, 8.77)))
    }

    pub fn damage_augmented() -> Self {
        Self::table(1.212e-5, 91, 200, 169, 0.498, Some((0.856, 1.532)))
    }

    fn table(lr: f64, epochs: usize, bs_train: usize, bs_test: usize, dropout: f64, aug: Option<(f64, f64)>) -> Self {
        TrainConfig {
            learning_rate: lr,
            epochs,
            batch_size_train: bs_train,
            batch_size_test: bs_test,
            dropout,
            feature_dim: default_feature_dim(),
            seed: 0,
            augment: aug.map(|(adr, af)| AugmentConfig { adr, af, seed: 0 }),
        }
    }
}

struct Adam<T> {
    lr: T,
    b1: T,
    b2: T,
    eps: T,
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

impl<T: Real> Adam<T> {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr: T::from_f64_lossy(lr),
            b1: T::from_f64_lossy(ADAM_BETA1),
            b2: T::from_f64_lossy(ADAM_BETA2),
            eps: T::from_f64_lossy(ADAM_EPSILON),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }

    /// Parameters and gradients laid out as weights then biases.
    fn update(&mut self, params: (&mut [T], &mut [T]), grad: &Gradient<T>) {
        self.step += 1;
        let c1 = T::one() - self.b1.powi(self.step);
        let c2 = T::one() - self.b2.powi(self.step);
        let (w, b) = params;
        let nw = w.len();
        let it = w
            .iter_mut()
            .zip(&grad.weights)
            .chain(b.iter_mut().zip(&grad.biases))
            .enumerate();
        for (i, (p, &g)) in it {
            debug_assert!(i < nw + grad.biases.len());
            let m = self.b1 * self.m[i] + (T::one() - self.b1) * g;
            let v = self.b2 * self.v[i] + (T::one() - self.b2) * g * g;
            self.m[i] = m;
            self.v[i] = v;
            *p = *p - self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
        }
    }
}

fn encode_all<T: Real>(encoder: &dyn EncoderBackend<T>, view: &DimensionDataset) -> Result<Vec<SparseVector<T>>> {
    view.items
        .par_iter()
        .map(|it| encoder.encode(&it.id, &it.text))
        .collect()
}

/// Mini-batch Adam on mean BCE, starting from zero weights.
///
/// With `cfg.augment` set, the view is augmented first. Inputs are shuffled
/// each epoch and pass through inverted dropout during training only. The
/// result is a pure function of `(view, cfg, encoder)`.
pub fn train<T: Real>(
    view: &DimensionDataset,
    cfg: &TrainConfig,
    encoder: &dyn EncoderBackend<T>,
) -> Result<LinearModel<T>> {
    cfg.validate()?;
    if view.is_empty() {
        return Err(Error::Empty("training view"));
    }
    let augmented;
    let view = match &cfg.augment {
        Some(a) => {
            augmented = augment_dataset(view, a)?;
            &augmented
        }
        None => view,
    };
    let features = encode_all(encoder, view)?;
    let labels = view.label_matrix();
    let mut model = LinearModel::zeros(view.dimension, view.classes.clone(), encoder.dim());
    let n_params = model.weights.len() + model.biases.len();
    let mut adam = Adam::new(n_params, cfg.learning_rate);
    let mut grad = Gradient {
        weights: vec![T::zero(); model.weights.len()],
        biases: vec![T::zero(); model.biases.len()],
    };
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size_train) {
            let dropped: Vec<SparseVector<T>> =
                chunk.iter().map(|&i| features[i].dropout(cfg.dropout, &mut rng)).collect();
            let batch: Vec<(&SparseVector<T>, &[bool])> =
                dropped.iter().zip(chunk).map(|(x, &i)| (x, labels.row(i))).collect();
            grad.weights.iter_mut().for_each(|g| *g = T::zero());
            grad.biases.iter_mut().for_each(|g| *g = T::zero());
            let loss = model.accumulate_gradient(&batch, &mut grad)?.to_f64();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.update((&mut model.weights, &mut model.biases), &grad);
        }
        let mean = epoch_loss / features.len() as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss: mean });
        }
        log::debug!("{} epoch {epoch}: loss {mean:.6}", view.dimension);
        trace.push(mean);
    }
    model.loss_trace = trace;
    model.config = Some(cfg.clone());
    Ok(model)
}

/// Scores every item of `view` in batches of `batch_size`. Rows are computed
/// independently, so the result does not depend on the batch size.
pub fn predict<T: Real>(
    model: &LinearModel<T>,
    encoder: &dyn EncoderBackend<T>,
    view: &DimensionDataset,
    batch_size: usize,
) -> Result<ScoreMatrix<T>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size_test must be >= 1".into()));
    }
    if model.dimension != view.dimension || model.classes != view.classes {
        return Err(Error::TaxonomyMismatch(format!(
            "model for {} {:?} applied to view {} {:?}",
            model.dimension, model.classes, view.dimension, view.classes
        )));
    }
    if encoder.dim() != model.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim,
            actual: encoder.dim(),
        });
    }
    let batches: Vec<Vec<Vec<T>>> = view
        .items
        .par_chunks(batch_size)
        .map(|chunk| {
            chunk
                .iter()
                .map(|it| model.forward(&encoder.encode(&it.id, &it.text)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    ScoreMatrix::from_rows(model.n_classes(), batches.into_iter().flatten().collect())
}
