//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point type the signal-processing core is generic over.
///
/// Implemented for `f32` and `f64`. `rustfft::FftNum` brings `Signed` along,
/// so `abs`/`signum` are ambiguous on a bare `T`; call them as `Float::abs(x)`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or physical quantity into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("value representable in the scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon as a plain `f64`, handy for scale-aware tolerances.
    #[inline]
    fn eps_f64() -> f64 {
        Self::epsilon().as_f64()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex sample type used throughout the crate.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Sum of `|x|²` over a slice.
pub fn energy<T: Real>(x: &[Complex<T>]) -> T {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Relative L2 distance `‖a − b‖ / ‖b‖` (absolute distance when `b` is zero).
pub fn rel_l2<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel_l2: length mismatch");
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).norm_sqr().as_f64())
        .sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr().as_f64()).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}
