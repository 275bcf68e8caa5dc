//! Floating-point abstraction shared by every dense routine.
//!
//! All matrix code is written against [`Real`], so the same algorithms run in
//! `f64` (the default, used by every tolerance quoted in the docs) and in
//! `f32` for quick low-precision sweeps.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use num_complex::Complex;

/// Real scalar usable as the field of a dense complex matrix.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Absolute Hermiticity defect tolerated before an input is rejected.
    const HERMITIAN_TOL: f64;
    /// Default lower bound for eigenvalues treated as zero rather than negative.
    const PSD_TOL: f64;
    /// Default threshold below which an eigenvalue is outside the support.
    const SUPPORT_TOL: f64;
    /// Allowed deviation of the trace from one before renormalizing.
    const TRACE_TOL: f64;

    /// Converts an `f64` literal, panicking only for non-representable values.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const HERMITIAN_TOL: f64 = 1e-10;
    const PSD_TOL: f64 = 1e-10;
    const SUPPORT_TOL: f64 = 1e-12;
    const TRACE_TOL: f64 = 1e-8;
}

impl Real for f32 {
    const HERMITIAN_TOL: f64 = 1e-4;
    const PSD_TOL: f64 = 1e-5;
    const SUPPORT_TOL: f64 = 1e-6;
    const TRACE_TOL: f64 = 1e-4;
}

/// Complex number with a [`Real`] field.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
