use num_complex::Complex;

use crate::dist_field::is_five_smooth;
use crate::error::{Error, Result};
use crate::scalar::{czero, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `X[m] = sum_n x[n] exp(-2 pi i m n / len)`, unnormalized.
    Forward,
    /// Conjugate kernel, scaled by `1 / len`.
    Inverse,
}

/// Mixed-radix (2, 3, 5) decimation-in-time transform of one length.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    len: usize,
    direction: Direction,
    factors: Vec<usize>,
    /// `w^e` for `e in 0..len`, `w = exp(-+ 2 pi i / len)`.
    twiddles: Vec<Complex<T>>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(len: usize, direction: Direction) -> Result<Self> {
        if !is_five_smooth(len) {
            return Err(Error::NonSmoothLength(len));
        }
        let mut factors = Vec::new();
        let mut n = len;
        // Radix 4 passes where possible; they share the generic butterfly.
        for p in [4, 2, 3, 5] {
            while n % p == 0 {
                factors.push(p);
                n /= p;
            }
        }
        let sign = match direction {
            Direction::Forward => -T::one(),
            Direction::Inverse => T::one(),
        };
        let two_pi = T::TAU();
        let lenf = T::from_usize_exact(len);
        let twiddles = (0..len)
            .map(|e| {
                let angle = two_pi * T::from_usize_exact(e) / lenf;
                Complex::new(angle.cos(), sign * angle.sin())
            })
            .collect();
        Ok(FftPlan { len, direction, factors, twiddles })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Transforms `buf` in place using `scratch` (at least `len` long).
    pub fn process_with_scratch(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        let scratch = &mut scratch[..self.len];
        scratch.copy_from_slice(buf);
        self.recurse(scratch, 1, buf, 0, 1);
        if self.direction == Direction::Inverse {
            let s = T::one() / T::from_usize_exact(self.len);
            for v in buf.iter_mut() {
                *v = *v * s;
            }
        }
    }

    pub fn process(&self, buf: &mut [Complex<T>]) {
        let mut scratch = vec![czero(); self.len];
        self.process_with_scratch(buf, &mut scratch);
    }

    /// Length `n = len / tw_stride` sub-transform of `input[0], input[stride], ...`
    /// written contiguously into `out`.
    fn recurse(&self, input: &[Complex<T>], stride: usize, out: &mut [Complex<T>], level: usize, tw_stride: usize) {
        let n = out.len();
        if n == 1 {
            out[0] = input[0];
            return;
        }
        let p = self.factors[level];
        let m = n / p;
        for r in 0..p {
            self.recurse(&input[r * stride..], stride * p, &mut out[r * m..(r + 1) * m], level + 1, tw_stride * p);
        }
        let len = self.len;
        let tw = &self.twiddles;
        let mut t = [czero::<T>(); 5];
        for k in 0..m {
            for (r, slot) in t.iter_mut().enumerate().take(p) {
                let w = tw[(r * k * tw_stride) % len];
                *slot = out[r * m + k] * w;
            }
            for q in 0..p {
                let mut acc = t[0];
                for (r, &tr) in t.iter().enumerate().take(p).skip(1) {
                    acc += tr * tw[(r * q * m * tw_stride) % len];
                }
                out[q * m + k] = acc;
            }
        }
    }
}

/// One-shot transform of `x`.
pub fn dft_1d<T: Scalar>(x: &[Complex<T>], direction: Direction) -> Result<Vec<Complex<T>>> {
    let plan = FftPlan::new(x.len(), direction)?;
    let mut out = x.to_vec();
    plan.process(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::direct_dft;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn rel_err(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..n).map(|_| c(next(), next())).collect()
    }

    #[test]
    fn delta_and_constant() {
        let x = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert!(dft_1d(&x, Direction::Forward).unwrap().iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
        let y = dft_1d(&[c(1.0, 0.0); 4], Direction::Forward).unwrap();
        assert!((y[0] - c(4.0, 0.0)).norm() < 1e-15);
        assert!(y[1..].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn rejects_non_smooth_lengths() {
        assert!(matches!(FftPlan::<f64>::new(7, Direction::Forward), Err(Error::NonSmoothLength(7))));
        assert!(FftPlan::<f64>::new(0, Direction::Forward).is_err());
    }

    #[test]
    fn matches_direct_sum() {
        for n in [1, 2, 3, 4, 5, 6, 8, 9, 10, 12, 15, 16, 25, 27, 30, 36, 60, 64, 100, 120, 125, 243] {
            let x = pseudo_random(n, n as u64);
            for dir in [Direction::Forward, Direction::Inverse] {
                let fast = dft_1d(&x, dir).unwrap();
                let slow = direct_dft(&x, dir);
                assert!(rel_err(&fast, &slow) < 1e-12, "n={n} {dir:?}");
            }
        }
    }

    #[test]
    fn round_trip_large() {
        let x = pseudo_random(8000, 9);
        let y = dft_1d(&dft_1d(&x, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        assert!(rel_err(&y, &x) < 1e-13);
    }

    #[test]
    fn single_precision_round_trip() {
        let x: Vec<Complex<f32>> = pseudo_random(60, 2).iter().map(|v| Complex::new(v.re as f32, v.im as f32)).collect();
        let y = dft_1d(&dft_1d(&x, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn parseval(seed in 0u64..1000, pick in 0usize..6) {
            let n = [6, 20, 45, 48, 60, 90][pick];
            let x = pseudo_random(n, seed);
            let big = dft_1d(&x, Direction::Forward).unwrap();
            let lhs: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let rhs: f64 = big.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }
    }
}
