//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All tensors hold `Complex<R>` where `R` is a real floating point type.
//! Both `f32` and `f64` are supported; the simulation drivers and the CLI
//! use `f64`.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    RealField + FromPrimitive + ToPrimitive + Copy + Default + Send + Sync + std::fmt::Display
{
    /// Lossless for `f64`, rounding for `f32`.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Complex number over a [`Real`] scalar.
pub type C<R> = Complex<R>;

#[inline]
pub fn c<R: Real>(re: R, im: R) -> C<R> {
    Complex::new(re, im)
}

#[inline]
pub fn cr<R: Real>(re: f64) -> C<R> {
    Complex::new(R::of(re), R::zero())
}

#[inline]
pub fn czero<R: Real>() -> C<R> {
    Complex::new(R::zero(), R::zero())
}

#[inline]
pub fn cone<R: Real>() -> C<R> {
    Complex::new(R::one(), R::zero())
}

#[inline]
pub fn abs2<R: Real>(z: C<R>) -> R {
    z.re * z.re + z.im * z.im
}

#[inline]
pub fn cabs<R: Real>(z: C<R>) -> R {
    z.re.hypot(z.im)
}

#[inline]
pub fn cexp<R: Real>(z: C<R>) -> C<R> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}
