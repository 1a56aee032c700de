//! Scalar abstraction for all distance and objective arithmetic.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar used for distances, linkage heights, objectives and
/// posteriors: `f32` or `f64`.
pub trait Float:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Tolerance for row-stochasticity checks on soft assignments.
    fn row_sum_tol() -> Self;

    /// Lossless-enough cast from a count.
    fn of_usize(n: usize) -> Self {
        num_traits::FromPrimitive::from_usize(n).expect("count representable as scalar")
    }

    /// Cast from an `f64` constant.
    fn of_f64(x: f64) -> Self {
        num_traits::FromPrimitive::from_f64(x).expect("constant representable as scalar")
    }

    /// Cast to `f64` for diagnostics and serialization.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar representable as f64")
    }
}

impl Float for f64 {
    fn row_sum_tol() -> f64 {
        1e-9
    }
}

impl Float for f32 {
    fn row_sum_tol() -> f32 {
        1e-5
    }
}
