//! Scalar math shims so the crate builds both with `std` and with `libm`.
//!
//! Only the transcendental functions need shimming; `abs`, `max`, and
//! comparisons are available in `core`.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }

    #[inline]
    pub fn powi(base: f64, exp: u32) -> f64 {
        base.powi(exp as i32)
    }
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn powi(base: f64, exp: u32) -> f64 {
        libm::pow(base, exp as f64)
    }
}

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("slipnet-core needs either the `std` or the `libm` feature");

pub(crate) use imp::{exp, ln, powi, sqrt};
