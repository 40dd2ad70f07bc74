//! Scalar abstraction shared by the numeric layers.

use std::fmt::{Debug, Display};

/// Floating point scalar usable by the signal, filter and estimator code: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + rustfft::FftNum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("representable literal")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(n).expect("representable integer")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_phase<T: Real>(phase: T) -> T {
    let two_pi = T::TAU();
    let mut p = (phase + T::PI()) % two_pi;
    if p < T::zero() {
        p += two_pi;
    }
    // `%` can return exactly 2pi after the correction above for tiny negative inputs.
    if p >= two_pi {
        p -= two_pi;
    }
    p - T::PI()
}

/// Difference `a - b` of two angles, wrapped into `[-pi, pi)`.
pub fn phase_difference<T: Real>(a: T, b: T) -> T {
    wrap_phase(a - b)
}
