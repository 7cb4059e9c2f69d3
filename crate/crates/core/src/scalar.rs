//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating point type the discretisation is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent it at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated sum in iteration order.
///
/// All quadratures go through this so that results only depend on cell order.
pub fn fsum<S: Real, I: IntoIterator<Item = S>>(terms: I) -> S {
    let mut sum = S::zero();
    let mut comp = S::zero();
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Euclidean (Frobenius) norm of a flat slice.
#[inline]
pub fn norm<S: Real>(v: &[S]) -> S {
    let mut acc = S::zero();
    for &x in v {
        acc = acc + x * x;
    }
    acc.sqrt()
}

/// `|z|^t` with the convention `0^t = 0` for every `t > 0`.
#[inline]
pub fn pow_abs<S: Real>(x: S, t: S) -> S {
    let a = x.abs();
    if a == S::zero() {
        S::zero()
    } else if t == S::one() {
        a
    } else if t == S::lit(2.0) {
        a * a
    } else {
        a.powf(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fsum_recovers_cancelled_terms() {
        let xs = [1.0e16_f64, 1.0, -1.0e16, 1.0];
        assert_eq!(fsum(xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn pow_abs_zero_convention() {
        assert_eq!(pow_abs(0.0_f64, 0.5), 0.0);
        assert_eq!(pow_abs(-3.0_f32, 2.0), 9.0);
    }
}
