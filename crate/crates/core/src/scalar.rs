//! Floating point scalar abstraction shared by every numeric kernel.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar type the solver is generic over: `f32` or `f64`.
///
/// Wire and file formats are always 64-bit, so every scalar must widen to
/// `f64` and narrow back from it.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    fn to_f64_lossy(self) -> f64;
    fn from_f64_lossy(v: f64) -> Self;

    /// Converts a small exact constant; panics only on non-representable input.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64_lossy(v)
    }

    #[inline]
    fn from_usize_exact(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize representable as float")
    }

    #[inline]
    fn from_i64_exact(v: i64) -> Self {
        <Self as FromPrimitive>::from_i64(v).expect("i64 representable as float")
    }
}

impl Scalar for f32 {
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

/// Complex number over a solver scalar.
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Serializes complex values as little-endian `f64` pairs (real, imaginary).
pub fn encode_complex<T: Scalar>(values: &[Complex<T>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_f64_lossy().to_le_bytes());
        out.extend_from_slice(&v.im.to_f64_lossy().to_le_bytes());
    }
    out
}

/// Inverse of [`encode_complex`]. Returns `None` when the length is not a
/// multiple of 16 bytes.
pub fn decode_complex<T: Scalar>(bytes: &[u8]) -> Option<Vec<Complex<T>>> {
    if bytes.len() % 16 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex::new(T::from_f64_lossy(re), T::from_f64_lossy(im))
            })
            .collect(),
    )
}
