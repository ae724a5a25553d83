use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::SparseVector;
use super::train::TrainConfig;
use crate::corpus::Dimension;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Probabilities are clamped to `[eps, 1 - eps]` before taking logs.
pub const PROB_EPSILON: f64 = 1e-7;

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Mean over classes of `-[y ln p + (1 - y) ln(1 - p)]`.
pub fn bce_loss<T: Real>(probs: &[T], labels: &[bool]) -> Result<T> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: probs.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    let eps = T::from_f64_lossy(PROB_EPSILON);
    let lo = eps;
    let hi = T::one() - eps;
    let total = probs.iter().zip(labels).fold(T::zero(), |acc, (&p, &y)| {
        let p = p.max(lo).min(hi);
        acc - if y { p.ln() } else { (T::one() - p).ln() }
    });
    Ok(total / T::from_count(probs.len()))
}

/// One linear layer with a sigmoid per class. Classes are scored
/// independently, so any subset may be positive at once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LinearModel<T> {
    pub format_version: u32,
    pub dimension: Dimension,
    pub classes: Vec<String>,
    pub feature_dim: usize,
    /// Class-major: `weights[c * feature_dim + j]`.
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    #[serde(default)]
    pub config: Option<TrainConfig>,
    /// Mean training loss per epoch.
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

/// Gradient of the batch-mean loss, same layout as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn zeros(dimension: Dimension, classes: Vec<String>, feature_dim: usize) -> Self {
        let n = classes.len();
        LinearModel {
            format_version: MODEL_FORMAT_VERSION,
            dimension,
            classes,
            feature_dim,
            weights: vec![T::zero(); n * feature_dim],
            biases: vec![T::zero(); n],
            config: None,
            loss_trace: Vec::new(),
        }
    }

    /// Untrained head with N(0, scale²) weights and zero biases.
    pub fn random(
        dimension: Dimension,
        classes: Vec<String>,
        feature_dim: usize,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, scale).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut m = Self::zeros(dimension, classes, feature_dim);
        for w in m.weights.iter_mut() {
            *w = T::from_f64_lossy(normal.sample(rng));
        }
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_weights(&self, class: usize) -> &[T] {
        &self.weights[class * self.feature_dim..(class + 1) * self.feature_dim]
    }

    fn check_input(&self, x: &SparseVector<T>) -> Result<()> {
        if x.dim() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: x.dim(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &SparseVector<T>) -> Result<Vec<T>> {
        self.check_input(x)?;
        Ok((0..self.n_classes())
            .map(|c| x.dot(self.class_weights(c)) + self.biases[c])
            .collect())
    }

    /// Per-class probabilities `sigmoid(w_c . x + b_c)`.
    pub fn forward(&self, x: &SparseVector<T>) -> Result<Vec<T>> {
        Ok(self.logits(x)?.into_iter().map(sigmoid).collect())
    }

    /// Mean BCE over a batch of (features, labels).
    pub fn loss(&self, batch: &[(&SparseVector<T>, &[bool])]) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut total = T::zero();
        for (x, y) in batch {
            total = total + bce_loss(&self.forward(x)?, y)?;
        }
        Ok(total / T::from_count(batch.len()))
    }

    /// Analytic gradient of [`Self::loss`]. The clamp is ignored, which is
    /// exact whenever every probability lies inside `(eps, 1 - eps)`.
    pub fn gradient(&self, batch: &[(&SparseVector<T>, &[bool])]) -> Result<Gradient<T>> {
        let mut g = Gradient {
            weights: vec![T::zero(); self.weights.len()],
            biases: vec![T::zero(); self.biases.len()],
        };
        self.accumulate_gradient(batch, &mut g)?;
        Ok(g)
    }

    /// Adds the batch gradient into `g` and returns the batch loss.
    pub(crate) fn accumulate_gradient(
        &self,
        batch: &[(&SparseVector<T>, &[bool])],
        g: &mut Gradient<T>,
    ) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let scale = T::one() / T::from_count(batch.len() * self.n_classes());
        let mut total = T::zero();
        for (x, y) in batch {
            let p = self.forward(x)?;
            total = total + bce_loss(&p, y)?;
            for c in 0..self.n_classes() {
                let target = if y[c] { T::one() } else { T::zero() };
                let dz = (p[c] - target) * scale;
                g.biases[c] = g.biases[c] + dz;
                let row = &mut g.weights[c * self.feature_dim..(c + 1) * self.feature_dim];
                for &(j, v) in x.entries() {
                    row[j as usize] = row[j as usize] + dz * v;
                }
            }
        }
        Ok(total / T::from_count(batch.len()))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        if m.weights.len() != m.feature_dim * m.classes.len() || m.biases.len() != m.classes.len() {
            return Err(Error::DimensionMismatch {
                expected: m.feature_dim * m.classes.len(),
                actual: m.weights.len(),
            });
        }
        Ok(m)
    }
}

/// Sigmoid scores, reports x classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> ScoreMatrix<T> {
    pub fn new(cols: usize) -> Self {
        ScoreMatrix { rows: 0, cols, data: Vec::new() }
    }

    pub fn from_rows(cols: usize, rows: Vec<Vec<T>>) -> Result<Self> {
        let mut m = ScoreMatrix::new(cols);
        for r in rows {
            m.push_row(&r)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[T]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}
