//! Scalar abstraction shared by every engine.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// `(sin(pi x), cos(pi x))` with exact values at multiples of one half.
///
/// The argument is reduced to `[-1, 1]` first so large `x` keeps its accuracy.
pub fn sin_cos_pi<T: Real>(x: T) -> (T, T) {
    let two = lit::<T>(2.0);
    let r = x - two * (x / two).round();
    let twice = r * two;
    if twice == twice.round() {
        // r in {-1, -1/2, 0, 1/2, 1}
        let k = twice.to_i64().unwrap_or(0);
        return match k {
            -2 | 2 => (T::zero(), -T::one()),
            -1 => (-T::one(), T::zero()),
            1 => (T::one(), T::zero()),
            _ => (T::zero(), T::one()),
        };
    }
    let (s, c) = (T::PI() * r).sin_cos();
    (s, c)
}

/// Numerically stable `ln(cosh(x))`.
pub fn ln_cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (-(a + a)).exp().ln_1p() - T::LN_2()
}
