use num_complex::Complex;

use super::Layout;
use crate::scalar::{czero, Scalar};

/// Which index of the global array a rank's local lines run along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Rank owns whole columns (fixed second index); lines run along the
    /// first index.
    Columns,
    /// Rank owns whole rows (fixed first index); lines run along the second
    /// index.
    Rows,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Columns => Orientation::Rows,
            Orientation::Rows => Orientation::Columns,
        }
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            Orientation::Columns => "column-distributed",
            Orientation::Rows => "row-distributed",
        }
    }
}

/// One rank's share of the global `K_psi x K_psi` complex array.
///
/// Local storage is `K_p` contiguous lines of length `K_psi`. The global
/// element `(i, j)` (first index `i`, second index `j`) lives on the rank
/// owning column `j` (column orientation) or row `i` (row orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T> {
    layout: Layout,
    rank: usize,
    orientation: Orientation,
    lines: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn zeros(layout: Layout, rank: usize, orientation: Orientation) -> Self {
        assert!(rank < layout.n_ranks(), "rank {rank} outside layout");
        SpectralField { layout, rank, orientation, lines: vec![czero(); layout.local_len()] }
    }

    pub(crate) fn from_lines(layout: Layout, rank: usize, orientation: Orientation, lines: Vec<Complex<T>>) -> Self {
        assert_eq!(lines.len(), layout.local_len());
        SpectralField { layout, rank, orientation, lines }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Local lines, `K_p` runs of `K_psi` values.
    pub fn local(&self) -> &[Complex<T>] {
        &self.lines
    }

    pub fn local_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.lines
    }

    pub fn line(&self, l: usize) -> &[Complex<T>] {
        let n = self.layout.n_psi();
        &self.lines[l * n..(l + 1) * n]
    }

    pub fn line_mut(&mut self, l: usize) -> &mut [Complex<T>] {
        let n = self.layout.n_psi();
        &mut self.lines[l * n..(l + 1) * n]
    }

    /// Global index of local line `l`.
    pub fn global_line(&self, l: usize) -> usize {
        self.layout.first_line(self.rank) + l
    }

    fn locate(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.layout.n_psi();
        if i >= n || j >= n {
            return None;
        }
        let (line, pos) = match self.orientation {
            Orientation::Columns => (j, i),
            Orientation::Rows => (i, j),
        };
        (self.layout.owner(line) == self.rank).then(|| (line - self.layout.first_line(self.rank)) * n + pos)
    }

    /// Element at global storage position `(i, j)`, if owned here.
    pub fn get(&self, i: usize, j: usize) -> Option<Complex<T>> {
        self.locate(i, j).map(|p| self.lines[p])
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> Option<&mut Complex<T>> {
        self.locate(i, j).map(|p| &mut self.lines[p])
    }

    /// Element at centered wavenumbers `(k1, k2)`, if owned here.
    pub fn get_k(&self, k1: i64, k2: i64) -> Option<Complex<T>> {
        let i = self.layout.storage_index(k1)?;
        let j = self.layout.storage_index(k2)?;
        self.get(i, j)
    }

    pub fn get_k_mut(&mut self, k1: i64, k2: i64) -> Option<&mut Complex<T>> {
        let i = self.layout.storage_index(k1)?;
        let j = self.layout.storage_index(k2)?;
        self.get_mut(i, j)
    }

    /// Visits every local element with its global `(i, j)` position.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, usize, &mut Complex<T>)) {
        let n = self.layout.n_psi();
        let first = self.layout.first_line(self.rank);
        let orientation = self.orientation;
        for (l, line) in self.lines.chunks_exact_mut(n).enumerate() {
            let g = first + l;
            for (p, v) in line.iter_mut().enumerate() {
                match orientation {
                    Orientation::Columns => f(p, g, v),
                    Orientation::Rows => f(g, p, v),
                }
            }
        }
    }

    pub fn for_each(&self, mut f: impl FnMut(usize, usize, Complex<T>)) {
        let n = self.layout.n_psi();
        let first = self.layout.first_line(self.rank);
        for (l, line) in self.lines.chunks_exact(n).enumerate() {
            let g = first + l;
            for (p, &v) in line.iter().enumerate() {
                match self.orientation {
                    Orientation::Columns => f(p, g, v),
                    Orientation::Rows => f(g, p, v),
                }
            }
        }
    }

    /// Zeroes every element with `|k1| > half_width` or `|k2| > half_width`.
    pub fn truncate_to(&mut self, half_width: usize) {
        let layout = self.layout;
        let hw = half_width as i64;
        self.for_each_mut(|i, j, v| {
            if layout.wavenumber(i).abs() > hw || layout.wavenumber(j).abs() > hw {
                *v = czero();
            }
        });
    }

    pub fn scale(&mut self, a: T) {
        for v in &mut self.lines {
            *v = *v * a;
        }
    }

    /// `self += a * other`; both fields must share layout and orientation.
    pub fn axpy(&mut self, a: T, other: &SpectralField<T>) {
        assert_eq!(self.layout, other.layout);
        assert_eq!(self.orientation, other.orientation);
        for (x, y) in self.lines.iter_mut().zip(&other.lines) {
            *x += *y * a;
        }
    }

    /// Largest element magnitude on this rank; NaN if any element is not finite.
    pub fn local_max_abs(&self) -> T {
        let mut m = T::zero();
        for v in &self.lines {
            let a = v.norm();
            if !a.is_finite() {
                return T::nan();
            }
            if a > m {
                m = a;
            }
        }
        m
    }
}

/// Replicated centered coefficient block `|k1|, |k2| <= K`, stored
/// column-major: `(k1, k2)` at `(k2 + K) * (2K + 1) + (k1 + K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band<T> {
    k: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Band<T> {
    pub fn zeros(k: usize) -> Self {
        let w = 2 * k + 1;
        Band { k, data: vec![czero(); w * w] }
    }

    pub fn from_data(k: usize, data: Vec<Complex<T>>) -> Option<Self> {
        let w = 2 * k + 1;
        (data.len() == w * w).then_some(Band { k, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        2 * self.k + 1
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    fn index(&self, k1: i64, k2: i64) -> Option<usize> {
        let k = self.k as i64;
        (k1.abs() <= k && k2.abs() <= k).then(|| ((k2 + k) * (2 * k + 1) + (k1 + k)) as usize)
    }

    pub fn get(&self, k1: i64, k2: i64) -> Complex<T> {
        self.index(k1, k2).map_or_else(czero, |i| self.data[i])
    }

    pub fn set(&mut self, k1: i64, k2: i64, v: Complex<T>) {
        let i = self.index(k1, k2).expect("wavenumber outside band");
        self.data[i] = v;
    }

    /// Iterates `(k1, k2, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Complex<T>)> + '_ {
        let k = self.k as i64;
        let w = self.width();
        self.data
            .iter()
            .enumerate()
            .map(move |(idx, &v)| ((idx % w) as i64 - k, (idx / w) as i64 - k, v))
    }

    /// Applies the Hermitian rule in place: for `k2 > 0`, or `k2 == 0` and
    /// `k1 > 0`, `(-k1, -k2)` becomes the conjugate of `(k1, k2)`; the zero
    /// mode is made real.
    pub fn symmetrize(&mut self) {
        let k = self.k as i64;
        for k2 in 0..=k {
            for k1 in -k..=k {
                if k2 == 0 && k1 <= 0 {
                    continue;
                }
                let v = self.get(k1, k2);
                self.set(-k1, -k2, v.conj());
            }
        }
        let z = self.get(0, 0);
        self.set(0, 0, Complex::new(z.re, T::zero()));
    }

    pub fn max_abs_diff(&self, other: &Band<T>) -> T {
        assert_eq!(self.k, other.k);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), |m, x| if x > m { x } else { m })
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|a| a.norm()).fold(T::zero(), |m, x| if x > m { x } else { m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_respects_ownership() {
        let layout = Layout::build(1, 3).unwrap(); // 6 x 6, two lines per rank
        let mut f = SpectralField::<f64>::zeros(layout, 1, Orientation::Columns);
        assert!(f.get(0, 1).is_none());
        *f.get_mut(5, 2).unwrap() = Complex::new(1.0, 0.0);
        assert_eq!(f.local()[5], Complex::new(1.0, 0.0));
        let r = SpectralField::<f64>::zeros(layout, 1, Orientation::Rows);
        assert!(r.get(2, 0).is_some());
        assert!(r.get(0, 2).is_none());
    }

    #[test]
    fn band_symmetrize_rule() {
        let mut b = Band::<f64>::zeros(3);
        b.set(2, 1, Complex::new(3.0, 4.0));
        b.set(0, 0, Complex::new(5.0, 2.0));
        b.symmetrize();
        assert_eq!(b.get(-2, -1), Complex::new(3.0, -4.0));
        assert_eq!(b.get(0, 0), Complex::new(5.0, 0.0));
        assert_eq!(b.get(2, 1), Complex::new(3.0, 4.0));
    }
}
