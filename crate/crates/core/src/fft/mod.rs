//! Discrete Fourier transforms: the 1D mixed-radix kernel, the distributed
//! 2D transform built on the global transpose, and the zero-padded
//! convolution used for the quadratic term.
//!
//! Sign convention: coefficients `c_k` stored at `k + 2K` map to grid values
//! `u(n) = sum_k c_k exp(-2 pi i k.n / K_psi)` through the forward kernel, and
//! back through the normalized inverse. The zero mode is the grid mean.

mod distributed;
mod plan;

use num_complex::Complex;

pub use distributed::Spectral;
pub use plan::{dft_1d, Direction, FftPlan};

use crate::scalar::{czero, Scalar};

/// Plain `O(n^2)` transform for lengths the mixed-radix kernel does not
/// cover (the `2K + 1` initial-data grid).
pub(crate) struct SlowDft<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    inverse: bool,
}

impl<T: Scalar> SlowDft<T> {
    pub(crate) fn new(n: usize, direction: Direction) -> Self {
        let sign = if direction == Direction::Forward { -T::one() } else { T::one() };
        let nf = T::from_usize_exact(n);
        let twiddles = (0..n)
            .map(|e| {
                let a = T::TAU() * T::from_usize_exact(e) / nf;
                Complex::new(a.cos(), sign * a.sin())
            })
            .collect();
        SlowDft { n, twiddles, inverse: direction == Direction::Inverse }
    }

    pub(crate) fn apply(&self, x: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.n;
        for (m, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = czero();
            for (j, v) in x.iter().enumerate() {
                acc += *v * self.twiddles[(m * j) % n];
            }
            *o = acc;
        }
        if self.inverse {
            let s = T::one() / T::from_usize_exact(n);
            for o in out.iter_mut().take(n) {
                *o = *o * s;
            }
        }
    }

    /// Separable transform of a column-major `n x n` array.
    pub(crate) fn apply_2d(&self, a: &mut [Complex<T>]) {
        let n = self.n;
        let mut tmp = vec![czero(); n];
        for col in a.chunks_exact_mut(n) {
            self.apply(col, &mut tmp);
            col.copy_from_slice(&tmp);
        }
        let mut row = vec![czero(); n];
        for i in 0..n {
            for j in 0..n {
                row[j] = a[j * n + i];
            }
            self.apply(&row, &mut tmp);
            for j in 0..n {
                a[j * n + i] = tmp[j];
            }
        }
    }
}
