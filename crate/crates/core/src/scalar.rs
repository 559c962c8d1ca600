//! Scalar abstraction shared by every estimator in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the estimators are generic over (`f32` or `f64`).
///
/// Link functions and normal quantiles are evaluated in `f64` and converted
/// back, so `f32` users get the same special-function accuracy as `f64`
/// users up to the final rounding.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for the supported float types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// Tolerance used when comparing probabilities that should coincide
    /// exactly in exact arithmetic (e.g. a fitted CDF and an ECDF).
    #[inline]
    fn prob_tolerance() -> Self {
        Self::epsilon().sqrt() * Self::lit(1e-2)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert_eq!(0.5f32.as_f64(), 0.5);
    }

    #[test]
    fn tolerance_scales_with_precision() {
        assert!(f64::prob_tolerance() < 1e-9);
        assert!(f32::prob_tolerance() > f64::prob_tolerance() as f32);
    }
}
