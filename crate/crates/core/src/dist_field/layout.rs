use crate::error::{Error, Result};

/// Decomposition of the augmented spectral array over ranks.
///
/// Centered wavenumbers `k` in `[-2K, 2K + k0]` are stored at index
/// `k + 2K`, so storage runs over `[0, K_psi)`. Each rank owns `K_p`
/// consecutive lines (columns or rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Layout {
    k: usize,
    k0: usize,
    n_psi: usize,
    n_ranks: usize,
}

/// True when `n` has no prime factors other than 2, 3 and 5.
pub fn is_five_smooth(mut n: usize) -> bool {
    if n == 0 {
        return false;
    }
    for p in [2, 3, 5] {
        while n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

impl Layout {
    /// Smallest augmented size `K_psi >= 4K + 1` that is 5-smooth and a
    /// multiple of `n_ranks`.
    pub fn build(k: usize, n_ranks: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if n_ranks == 0 {
            return Err(Error::InvalidParameter("rank count must be at least 1".into()));
        }
        let mut n = 4 * k + 1;
        while !(n % n_ranks == 0 && is_five_smooth(n)) {
            n += 1;
        }
        Ok(Layout { k, k0: n - 4 * k - 1, n_psi: n, n_ranks })
    }

    /// Layout with an explicit augmented size, validated against every
    /// layout invariant.
    pub fn with_size(k: usize, n_psi: usize, n_ranks: usize) -> Result<Self> {
        if k == 0 || n_ranks == 0 {
            return Err(Error::InvalidParameter("K and rank count must be positive".into()));
        }
        if n_psi < 4 * k + 1 {
            return Err(Error::InvalidParameter(format!("K_psi = {n_psi} < 4K + 1 = {}", 4 * k + 1)));
        }
        if n_psi % n_ranks != 0 {
            return Err(Error::InvalidParameter(format!("K_psi = {n_psi} not divisible by {n_ranks} ranks")));
        }
        if !is_five_smooth(n_psi) {
            return Err(Error::NonSmoothLength(n_psi));
        }
        Ok(Layout { k, k0: n_psi - 4 * k - 1, n_psi, n_ranks })
    }

    /// Retained-mode half-width `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    /// Augmented size `K_psi = 4K + k0 + 1`.
    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    pub fn n_ranks(&self) -> usize {
        self.n_ranks
    }

    /// Lines per rank, `K_p = K_psi / N_p`.
    pub fn k_p(&self) -> usize {
        self.n_psi / self.n_ranks
    }

    /// Storage offset of wavenumber zero (`2K`).
    pub fn offset(&self) -> usize {
        2 * self.k
    }

    pub fn storage_index(&self, k: i64) -> Option<usize> {
        let s = k + self.offset() as i64;
        (s >= 0 && (s as usize) < self.n_psi).then_some(s as usize)
    }

    pub fn wavenumber(&self, s: usize) -> i64 {
        s as i64 - self.offset() as i64
    }

    pub fn owner(&self, line: usize) -> usize {
        line / self.k_p()
    }

    pub fn first_line(&self, rank: usize) -> usize {
        rank * self.k_p()
    }

    pub fn local_len(&self) -> usize {
        self.k_p() * self.n_psi
    }

    /// Same `K` and `K_psi` spread over a different rank count.
    pub fn with_ranks(&self, n_ranks: usize) -> Result<Self> {
        Layout::with_size(self.k, self.n_psi, n_ranks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent enumeration: walk 5-smooth numbers generated from
    /// exponents and pick the smallest valid one.
    fn oracle(k: usize, np: usize) -> usize {
        let mut best = usize::MAX;
        let lo = 4 * k + 1;
        let mut p2 = 1usize;
        while p2 < 4 * lo {
            let mut p3 = p2;
            while p3 < 4 * lo {
                let mut p5 = p3;
                while p5 < 4 * lo {
                    if p5 >= lo && p5 % np == 0 {
                        best = best.min(p5);
                    }
                    p5 *= 5;
                }
                p3 *= 3;
            }
            p2 *= 2;
        }
        best
    }

    #[test]
    fn examples() {
        let l = Layout::build(1, 1).unwrap();
        assert_eq!((l.n_psi(), l.k0()), (5, 0));
        let l = Layout::build(500, 4).unwrap();
        assert_eq!((l.n_psi(), l.k0()), (2048, 47));
        // Benchmark regime around K_psi = 8000.
        let l = Layout::build(1999, 8).unwrap();
        assert_eq!(l.n_psi(), oracle(1999, 8));
        assert_eq!(l.n_psi(), 8000);
        assert_eq!(Layout::build(2000, 8).unwrap().n_psi(), oracle(2000, 8));
        assert_eq!(Layout::build(1, 3).unwrap().n_psi(), 6);
    }

    #[test]
    fn matches_enumeration_oracle() {
        for k in 1..60 {
            for np in [1, 2, 3, 4, 5, 6, 8, 12] {
                let l = Layout::build(k, np).unwrap();
                assert_eq!(l.n_psi(), oracle(k, np), "K={k} Np={np}");
                assert_eq!(l.n_psi(), 4 * k + l.k0() + 1);
                assert_eq!(l.k_p() * np, l.n_psi());
            }
        }
    }

    #[test]
    fn index_maps() {
        let l = Layout::build(3, 2).unwrap();
        assert_eq!(l.offset(), 6);
        assert_eq!(l.storage_index(-6), Some(0));
        assert_eq!(l.storage_index(-7), None);
        assert_eq!(l.wavenumber(9), 3);
        assert_eq!(l.owner(l.n_psi() - 1), 1);
    }

    #[test]
    fn rejects_invalid_sizes() {
        assert!(Layout::with_size(2, 8, 2).is_err());
        assert!(Layout::with_size(2, 14, 2).is_err());
        assert!(Layout::with_size(2, 10, 3).is_err());
        assert!(Layout::build(0, 1).is_err());
    }
}
