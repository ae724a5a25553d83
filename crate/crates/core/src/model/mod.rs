//! Featurization and the multilabel sigmoid classifier.

mod features;
mod linear;
mod text;
mod train;

pub use features::{featurize, fnv1a64, EncoderBackend, HashingEncoder, PrecomputedEncoder, SparseVector};
pub use linear::{bce_loss, sigmoid, Gradient, LinearModel, ScoreMatrix, MODEL_FORMAT_VERSION, PROB_EPSILON};
pub use text::tokenize;
pub use train::{predict, train, TrainConfig, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
