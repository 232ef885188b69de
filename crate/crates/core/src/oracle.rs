//! Slow reference computations used by the self-test command and the test
//! suites. Nothing here shares code with the fast paths it checks.

use num_complex::Complex;

use crate::dist_field::Band;
use crate::fft::Direction;
use crate::scalar::Scalar;

/// `O(n^2)` discrete Fourier transform with the same conventions as
/// [`crate::fft::dft_1d`].
pub fn direct_dft<T: Scalar>(x: &[Complex<T>], direction: Direction) -> Vec<Complex<T>> {
    let n = x.len();
    let sign = if direction == Direction::Forward { -1.0 } else { 1.0 };
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let mut acc = Complex::new(0.0f64, 0.0);
        for (j, v) in x.iter().enumerate() {
            // Reduce the exponent first to keep the angle small.
            let e = (m * j) % n;
            let angle = sign * std::f64::consts::TAU * e as f64 / n as f64;
            let w = Complex::new(angle.cos(), angle.sin());
            acc += Complex::new(v.re.to_f64_lossy(), v.im.to_f64_lossy()) * w;
        }
        if direction == Direction::Inverse {
            acc /= n as f64;
        }
        out.push(Complex::new(T::from_f64_lossy(acc.re), T::from_f64_lossy(acc.im)));
    }
    out
}

/// Serial 2D transform of a column-major `n x n` array by direct sums along
/// both indices.
pub fn direct_dft_2d<T: Scalar>(a: &[Complex<T>], n: usize, direction: Direction) -> Vec<Complex<T>> {
    assert_eq!(a.len(), n * n);
    let mut cols: Vec<Complex<T>> = Vec::with_capacity(n * n);
    for j in 0..n {
        cols.extend(direct_dft(&a[j * n..(j + 1) * n], direction));
    }
    let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
    for i in 0..n {
        let row: Vec<Complex<T>> = (0..n).map(|j| cols[j * n + i]).collect();
        for (j, v) in direct_dft(&row, direction).into_iter().enumerate() {
            out[j * n + i] = v;
        }
    }
    out
}

/// Transpose of a row-major `rows x cols` matrix.
pub fn serial_transpose<V: Copy>(a: &[V], rows: usize, cols: usize) -> Vec<V> {
    assert_eq!(a.len(), rows * cols);
    let mut out = Vec::with_capacity(a.len());
    for c in 0..cols {
        for r in 0..rows {
            out.push(a[r * cols + c]);
        }
    }
    out
}

/// Truncated linear convolution `c[k] = sum_l a[l] b[k - l]` for
/// `|k1|, |k2| <= K`, summing over every `l` with both factors in band.
pub fn direct_convolution<T: Scalar>(a: &Band<T>, b: &Band<T>) -> Band<T> {
    weighted_convolution(a, b, |_, _| 1.0)
}

/// `sum_l l.(k - l) phi_l phi_{k-l}` over the band, the quadratic sum of the
/// flame equation, by brute force.
pub fn direct_quadratic_sum<T: Scalar>(phi: &Band<T>) -> Band<T> {
    weighted_convolution(phi, phi, |l, m| (l.0 * m.0 + l.1 * m.1) as f64)
}

fn weighted_convolution<T: Scalar>(
    a: &Band<T>,
    b: &Band<T>,
    weight: impl Fn((i64, i64), (i64, i64)) -> f64,
) -> Band<T> {
    assert_eq!(a.k(), b.k());
    let k = a.k() as i64;
    let to64 = |v: Complex<T>| Complex::new(v.re.to_f64_lossy(), v.im.to_f64_lossy());
    let mut out = Band::zeros(a.k());
    for k2 in -k..=k {
        for k1 in -k..=k {
            let mut acc = Complex::new(0.0f64, 0.0);
            for l2 in -k..=k {
                for l1 in -k..=k {
                    let (m1, m2) = (k1 - l1, k2 - l2);
                    if m1.abs() > k || m2.abs() > k {
                        continue;
                    }
                    acc += to64(a.get(l1, l2)) * to64(b.get(m1, m2)) * weight((l1, l2), (m1, m2));
                }
            }
            out.set(k1, k2, Complex::new(T::from_f64_lossy(acc.re), T::from_f64_lossy(acc.im)));
        }
    }
    out
}

/// Physical values `u(x_n) = sum_k c_k exp(-2 pi i k.n / M)` of a band on
/// the `M x M` grid, `M = 2K + 1`, column-major by `(n1, n2)`.
pub fn band_to_grid<T: Scalar>(band: &Band<T>) -> Vec<Complex<f64>> {
    let m = band.width();
    let mut out = vec![Complex::new(0.0, 0.0); m * m];
    for n2 in 0..m {
        for n1 in 0..m {
            let mut acc = Complex::new(0.0f64, 0.0);
            for (k1, k2, v) in band.iter() {
                let e = ((k1 * n1 as i64 + k2 * n2 as i64).rem_euclid(m as i64)) as f64;
                let angle = -std::f64::consts::TAU * e / m as f64;
                acc += Complex::new(v.re.to_f64_lossy(), v.im.to_f64_lossy()) * Complex::new(angle.cos(), angle.sin());
            }
            out[n2 * m + n1] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_small() {
        assert_eq!(serial_transpose(&[1, 2, 3, 4, 5, 6], 2, 3), vec![1, 4, 2, 5, 3, 6]);
    }

    #[test]
    fn convolution_of_deltas() {
        let mut a = Band::<f64>::zeros(2);
        a.set(1, 0, Complex::new(1.0, 0.0));
        let c = direct_convolution(&a, &a);
        assert_eq!(c.get(2, 0), Complex::new(1.0, 0.0));
        assert_eq!(c.data().iter().filter(|v| v.norm() > 0.0).count(), 1);
    }
}
