//! Scalar abstraction shared by the geometric kernels.

use nalgebra as na;
use num_traits as nt;

/// Floating point type usable by the geometry, box fitting, fusion and IoU code.
///
/// Implemented for `f32` and `f64`. The tracking pipeline itself runs on `f64`;
/// the generic kernels exist so the same math can run in single precision.
pub trait Real:
    na::RealField + nt::FromPrimitive + nt::ToPrimitive + Copy + std::fmt::Debug + Default
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("finite literal")
    }

    /// Conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("count fits")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn finite(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
