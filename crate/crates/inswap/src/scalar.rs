//! Scalar abstractions.
//!
//! [`Scalar`] is what the barrier arithmetic needs: an ordered field with
//! conversions. It is implemented for `f32`, `f64` and `Ratio<i64>`.
//! [`Real`] adds transcendental functions for weights and integration.

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::{Debug, Display};

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// The exact value `num / den` where representable.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// (1/2)^n
    fn half_pow(n: u32) -> Self {
        let mut x = Self::one();
        let half = Self::from_ratio(1, 2);
        for _ in 0..n {
            x = x * half.clone();
        }
        x
    }

    /// Slack used when comparing values that should tie: zero for exact
    /// types, a small multiple of machine precision for floats.
    fn tolerance() -> Self;

    fn from_count(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f32 / den as f32
    }
    fn tolerance() -> Self {
        1e-5
    }
}

impl Scalar for Ratio<i64> {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
    fn tolerance() -> Self {
        Ratio::from_integer(0)
    }
}

pub trait Real: Scalar + Float {}

impl Real for f64 {}
impl Real for f32 {}

pub fn min2<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

pub fn max2<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// max(x, 0)
pub fn pos_part<T: Scalar>(x: T) -> T {
    max2(x, T::zero())
}

/// Minimum of a non-empty iterator.
pub fn min_of<T: Scalar>(it: impl IntoIterator<Item = T>) -> Option<T> {
    it.into_iter().reduce(min2)
}

pub fn max_of<T: Scalar>(it: impl IntoIterator<Item = T>) -> Option<T> {
    it.into_iter().reduce(max2)
}

/// Convert between scalar types through `f64`; exact for rationals whose
/// value is a dyadic fraction and for all floats.
pub fn convert<S: Scalar, T: Scalar>(x: &S) -> T {
    T::from_f64(x.to_f64_lossy()).expect("finite scalar")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_powers_are_exact() {
        assert_eq!(<Ratio<i64>>::half_pow(3), Ratio::new(1, 8));
        assert_eq!(f64::half_pow(6), 0.015625);
        assert_eq!(f32::half_pow(0), 1.0);
    }

    #[test]
    fn min_max_helpers() {
        assert_eq!(min2(3.0, -1.0), -1.0);
        assert_eq!(max2(Ratio::new(1, 3), Ratio::new(1, 2)), Ratio::new(1, 2));
        assert_eq!(pos_part(-2.0_f64), 0.0);
        assert_eq!(min_of(vec![4.0, 2.0, 9.0]), Some(2.0));
        assert_eq!(max_of(Vec::<f64>::new()), None);
    }
}
