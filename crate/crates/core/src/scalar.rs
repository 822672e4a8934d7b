use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point type the numerical core is written against.
///
/// Implemented for `f32` and `f64`. Everything that crosses a process
/// boundary (sessions, CSV, HTTP) is `f64`; the generic layer exists so the
/// kernels, posterior and acquisition math can be exercised in either width.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Literal conversion; panics only if `v` is not representable, which
    /// cannot happen for the finite constants used in this crate.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Complementary error function, evaluated in double precision.
    #[inline]
    fn erfc(self) -> Self {
        Self::lit(libm::erfc(self.as_f64()))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Standard normal density.
pub fn normal_pdf<T: Scalar>(z: T) -> T {
    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(z * z) / T::lit(2.0)).exp()
}

/// Standard normal CDF via `erfc`, accurate in both tails.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * (-z / T::SQRT_2()).erfc()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_matches_known_values() {
        assert!((normal_cdf(0.0f64) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054f64) - 0.975).abs() < 1e-12);
        assert!(normal_cdf(-40.0f64) >= 0.0);
        assert!((normal_cdf(1.0f32) - 0.841_344_75).abs() < 1e-6);
    }

    #[test]
    fn pdf_peak() {
        assert!((normal_pdf(0.0f64) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }
}
