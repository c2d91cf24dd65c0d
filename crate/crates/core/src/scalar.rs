use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::poly::Coeff;

/// Floating point scalar used throughout the numerical modules: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Coeff + Debug + Display + Default + Send + Sync + Sum + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `|a - b| <= rel * max(|a|, |b|, 1)`.
pub fn approx_eq<T: Scalar>(a: T, b: T, rel: T) -> bool {
    let scale = a.abs().max(b.abs()).max(T::one());
    (a - b).abs() <= rel * scale
}
