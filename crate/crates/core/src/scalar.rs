//! Scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossless for f32 and f64.
    fn to_f64_lossless(self) -> f64;

    /// Rounds to nearest for f32.
    fn from_f64_round(x: f64) -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64_round(x)
    }

    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_f64_round(n as f64)
    }

    #[inline]
    fn from_isize_exact(n: isize) -> Self {
        Self::from_f64_round(n as f64)
    }
}

impl Real for f32 {
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }

    #[inline]
    fn from_f64_round(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self
    }

    #[inline]
    fn from_f64_round(x: f64) -> Self {
        x
    }
}

/// Pairwise (cascade) summation with a fixed split, so the result depends only
/// on the order of `values`, never on thread scheduling.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut acc = T::zero();
        for &v in values {
            acc = acc + v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
