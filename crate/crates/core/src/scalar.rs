use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is written against (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Literal conversion; every literal used in the crate is representable.
#[inline]
pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Standard normal cumulative distribution via the complementary error function.
#[inline]
pub(crate) fn norm_cdf<T: Scalar>(x: T) -> T {
    let v = 0.5 * libm::erfc(-to_f64(x) * std::f64::consts::FRAC_1_SQRT_2);
    lit(v)
}

#[inline]
pub(crate) fn norm_pdf<T: Scalar>(x: T) -> T {
    let inv_sqrt_2pi: T = lit(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) * lit(0.5)).exp()
}

/// `ln Σ exp(v_i)` computed stably; `-inf` for an empty or all `-inf` slice.
pub(crate) fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    if !max.is_finite() {
        return max;
    }
    let s: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert_eq!(norm_cdf(0.0_f64), 0.5);
        // Φ(1.96) and Φ(-5) from high-precision tables.
        assert!((norm_cdf(1.96_f64) - 0.975_002_104_851_780_1).abs() < 1e-15);
        let tail = norm_cdf(-5.0_f64);
        assert!((tail / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn log_sum_exp_handles_underflow() {
        let v = [-1000.0_f64, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2.0_f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }
}
