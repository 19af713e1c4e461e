//! Scalar abstraction.
//!
//! Everything numeric in the crate is generic over a real floating point type
//! `T: Real`; matrices carry `Complex<T>` entries.

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable as the base field of the complex matrices in this crate.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant (tolerances, seeds of random draws).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// An `f64` tolerance, floored at a hundred machine epsilons of `Self`.
    fn tol(x: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(100.0);
        let t = Self::lit(x);
        if t < floor {
            floor
        } else {
            t
        }
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

#[inline]
pub fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

/// Modulus of a complex number, written without `ComplexField` to avoid
/// method ambiguity with `num_complex`.
#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

#[inline]
pub fn cconj<T: Real>(z: C<T>) -> C<T> {
    Complex::new(z.re, -z.im)
}

pub fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .fold(T::zero(), |acc, z| acc + z.re * z.re + z.im * z.im)
        .sqrt()
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

/// `max(1, x)`, the absolute floor used by every relative tolerance.
#[inline]
pub fn floor_one<T: Real>(x: T) -> T {
    x.max(T::one())
}
