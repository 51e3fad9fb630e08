//! Scalar abstraction: all time and level arithmetic is generic over an
//! IEEE floating-point type (`f32` or `f64`, with `f64` the default).

use std::fmt::{Debug, Display};

/// Floating-point scalar used for seconds, gaps, log-likelihoods and gain
/// levels throughout the crate.
pub trait Float:
    num_traits::Float + num_traits::FloatConst + num_traits::FromPrimitive + num_traits::ToPrimitive + Debug + Display + 'static
{
}

impl Float for f32 {}
impl Float for f64 {}

/// Converts an `f64` literal into the working scalar type.
pub(crate) fn lit<T: Float>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must be representable in the scalar type")
}

/// `to_f64` for diagnostics and error messages.
pub(crate) fn as_f64<T: Float>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
