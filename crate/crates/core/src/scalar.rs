use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Exact rational scalar used to check metric code without rounding error.
pub type Rational = num_rational::Ratio<i64>;

/// Minimal numeric surface needed by the ranking metrics.
///
/// Implemented for `f32`, `f64` and [`Rational`].
pub trait Scalar: Num + Copy + PartialOrd + Debug {
    fn from_count(n: usize) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Rational {
    fn from_count(n: usize) -> Self {
        Rational::from_integer(n as i64)
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Floating-point scalar for the classifier and optimizer.
pub trait Real:
    Scalar
    + Float
    + FromPrimitive
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {}
impl Real for f64 {}
