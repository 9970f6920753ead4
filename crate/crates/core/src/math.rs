//! Float math shim: inherent `f64` methods under `std`, `libm` otherwise.
//!
//! Inherent methods win method resolution, so importing [`FloatExt`] is a
//! no-op on `std` builds and supplies the same names on `no_std` builds.

#[allow(unused)]
pub(crate) trait FloatExt: Sized {
    fn sqrt(self) -> Self;
    fn cbrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn asin(self) -> Self;
    fn acos(self) -> Self;
    fn atan2(self, other: Self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn log10(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: Self) -> Self;
    fn floor(self) -> Self;
    fn ceil(self) -> Self;
    fn round(self) -> Self;
    fn hypot(self, other: Self) -> Self;
    fn sin_cos(self) -> (Self, Self);
}

#[cfg(feature = "std")]
impl FloatExt for f64 {
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    fn cbrt(self) -> f64 {
        f64::cbrt(self)
    }
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    fn tan(self) -> f64 {
        f64::tan(self)
    }
    fn asin(self) -> f64 {
        f64::asin(self)
    }
    fn acos(self) -> f64 {
        f64::acos(self)
    }
    fn atan2(self, other: f64) -> f64 {
        f64::atan2(self, other)
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    fn log10(self) -> f64 {
        f64::log10(self)
    }
    fn powi(self, n: i32) -> f64 {
        f64::powi(self, n)
    }
    fn powf(self, e: f64) -> f64 {
        f64::powf(self, e)
    }
    fn floor(self) -> f64 {
        f64::floor(self)
    }
    fn ceil(self) -> f64 {
        f64::ceil(self)
    }
    fn round(self) -> f64 {
        f64::round(self)
    }
    fn hypot(self, other: f64) -> f64 {
        f64::hypot(self, other)
    }
    fn sin_cos(self) -> (f64, f64) {
        f64::sin_cos(self)
    }
}

#[cfg(not(feature = "std"))]
impl FloatExt for f64 {
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    fn cbrt(self) -> f64 {
        libm::cbrt(self)
    }
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    fn tan(self) -> f64 {
        libm::tan(self)
    }
    fn asin(self) -> f64 {
        libm::asin(self)
    }
    fn acos(self) -> f64 {
        libm::acos(self)
    }
    fn atan2(self, other: f64) -> f64 {
        libm::atan2(self, other)
    }
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    fn ln(self) -> f64 {
        libm::log(self)
    }
    fn log10(self) -> f64 {
        libm::log10(self)
    }
    fn powi(self, n: i32) -> f64 {
        libm::pow(self, n as f64)
    }
    fn powf(self, e: f64) -> f64 {
        libm::pow(self, e)
    }
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    fn round(self) -> f64 {
        libm::round(self)
    }
    fn hypot(self, other: f64) -> f64 {
        libm::hypot(self, other)
    }
    fn sin_cos(self) -> (f64, f64) {
        (libm::sin(self), libm::cos(self))
    }
}
