//! Scalar abstraction for the numeric core.
//!
//! Everything continuous (factor matrices, fake profiles, metrics, network
//! weights) is generic over [`Scalar`]; `f32` and `f64` both satisfy it.
//! Random draws always happen in `f64` and are converted, so seeded runs
//! produce the same stream of values regardless of the scalar in use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + LinalgScalar
    + Sum<Self>
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`, panicking only for values unrepresentable in the
    /// target type (never for `f32`/`f64`).
    fn cast(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 not representable in scalar type")
    }

    /// Widens to `f64` (lossless for `f32` and `f64`).
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar not representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + ScalarOperand
        + LinalgScalar
        + Sum<T>
        + Display
        + Debug
        + Send
        + Sync
        + 'static
{
}
