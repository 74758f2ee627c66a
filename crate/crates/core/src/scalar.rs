//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the moment and optimization code is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative cutoff for treating a symmetric eigenvalue as zero.
    #[inline]
    fn rel_cutoff() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `cos(x)^k` for an integer exponent, including negative `k`.
///
/// Uses exponent-by-squaring through `powi`; a zero base with negative
/// exponent yields `inf`, so callers that multiply by a vanishing prefactor
/// should go through [`weighted_cos_pow`].
#[inline]
pub fn cos_pow<T: Scalar>(x: T, k: i64) -> T {
    let c = x.cos();
    if k == 0 {
        return T::one();
    }
    match i32::try_from(k) {
        Ok(k) => c.powi(k),
        Err(_) => c.powf(T::from_i64(k).expect("exponent representable")),
    }
}

/// `coef * cos(x)^k`, taken as exactly zero when `coef` is zero.
///
/// Closed forms carry factors like `N(N-1) cos(x)^(N-2)`; at `N = 1` the
/// exponent is negative while the prefactor vanishes, and the product is 0.
#[inline]
pub fn weighted_cos_pow<T: Scalar>(coef: T, x: T, k: i64) -> T {
    if coef == T::zero() {
        T::zero()
    } else {
        coef * cos_pow(x, k)
    }
}
