//! Scalar abstraction for the numeric core.
//!
//! Training runs in `f32`; the finite-difference gradient oracle instantiates
//! the same code in `f64`. Everything that touches model tensors is generic
//! over [`Scalar`] so the two paths cannot drift apart.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Scalar:
    Float + NumAssign + ScalarOperand + LinalgScalar + Sum + Send + Sync + Debug + Display + 'static
{
    const DTYPE: &'static str;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Shorthand for converting literals inside generic code.
#[inline]
pub fn fl<F: Scalar>(x: f64) -> F {
    F::from_f64(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_generic<F: Scalar>(xs: &[f64]) -> f64 {
        xs.iter().map(|&x| fl::<F>(x)).sum::<F>().to_f64()
    }

    #[test]
    fn both_widths_round_trip() {
        assert_eq!(sum_generic::<f64>(&[0.5, 0.25]), 0.75);
        assert_eq!(sum_generic::<f32>(&[0.5, 0.25]), 0.75);
        assert_eq!(f32::DTYPE, "f32");
        assert_eq!(f64::DTYPE, "f64");
    }
}
