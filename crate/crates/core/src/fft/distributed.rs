use num_complex::Complex;

use super::{Direction, FftPlan};
use crate::comm::Communicator;
use crate::dist_field::{self, Band, Layout, Orientation, SpectralField, TransposeStrategy};
use crate::error::{Error, Result};
use crate::scalar::{czero, decode_complex, encode_complex, Scalar};
use crate::timing::{Phase, PhaseTimers};

/// One rank's handle on the distributed spectral machinery: its
/// communicator, the layout, transform plans and per-phase timers.
///
/// Every method that moves data is collective: all ranks call the same
/// methods in the same order.
pub struct Spectral<T: Scalar> {
    comm: Communicator,
    layout: Layout,
    forward: FftPlan<T>,
    inverse: FftPlan<T>,
    /// `exp(+2 pi i (2K n mod K_psi) / K_psi)`, undoing the `2K` storage shift.
    phase: Vec<Complex<T>>,
    strategy: TransposeStrategy,
    timers: PhaseTimers,
    scratch: Vec<Complex<T>>,
}

impl<T: Scalar> Spectral<T> {
    pub fn new(comm: Communicator, layout: Layout, strategy: TransposeStrategy) -> Result<Self> {
        if comm.size() != layout.n_ranks() {
            return Err(Error::InvalidParameter(format!(
                "layout built for {} ranks, communicator has {}",
                layout.n_ranks(),
                comm.size()
            )));
        }
        let n = layout.n_psi();
        let shift = layout.offset();
        let nf = T::from_usize_exact(n);
        let phase = (0..n)
            .map(|p| {
                let a = T::TAU() * T::from_usize_exact((shift * p) % n) / nf;
                Complex::new(a.cos(), a.sin())
            })
            .collect();
        Ok(Spectral {
            forward: FftPlan::new(n, Direction::Forward)?,
            inverse: FftPlan::new(n, Direction::Inverse)?,
            comm,
            layout,
            phase,
            strategy,
            timers: PhaseTimers::default(),
            scratch: vec![czero(); n],
        })
    }

    pub fn comm(&self) -> &Communicator {
        &self.comm
    }

    pub fn comm_mut(&mut self) -> &mut Communicator {
        &mut self.comm
    }

    pub fn into_comm(self) -> Communicator {
        self.comm
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn rank(&self) -> usize {
        self.comm.rank()
    }

    pub fn strategy(&self) -> TransposeStrategy {
        self.strategy
    }

    pub fn set_strategy(&mut self, strategy: TransposeStrategy) {
        self.strategy = strategy;
    }

    pub fn timers(&self) -> &PhaseTimers {
        &self.timers
    }

    pub fn timers_mut(&mut self) -> &mut PhaseTimers {
        &mut self.timers
    }

    pub fn zeros(&self) -> SpectralField<T> {
        SpectralField::zeros(self.layout, self.rank(), Orientation::Columns)
    }

    /// Runs `f` on the communicator and books its time and received
    /// elements under `phase`.
    pub(crate) fn communicate<R>(
        &mut self,
        phase: Phase,
        f: impl FnOnce(&mut Communicator) -> Result<R>,
    ) -> Result<R> {
        let before = self.comm.counters();
        let t = self.timers.start();
        let out = f(&mut self.comm)?;
        let elements = self.comm.counters().since(&before).complex_received();
        self.timers.add(phase, t.elapsed(), elements);
        Ok(out)
    }

    /// Transforms every local line in place.
    pub fn transform_lines(&mut self, f: &mut SpectralField<T>, direction: Direction) {
        let t = self.timers.start();
        let plan = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let n = self.layout.n_psi();
        for line in f.local_mut().chunks_exact_mut(n) {
            plan.process_with_scratch(line, &mut self.scratch);
        }
        self.timers.add(Phase::Fft, t.elapsed(), 0);
    }

    /// Global transpose with the configured strategy.
    pub fn transpose(&mut self, f: &SpectralField<T>) -> Result<SpectralField<T>> {
        let strategy = self.strategy;
        self.communicate(Phase::Transpose, |c| dist_field::transpose(c, f, strategy))
    }

    /// Distributed 2D transform: 1D transforms along the local lines, global
    /// transpose, 1D transforms along the new lines. Column-distributed input
    /// comes back row-distributed and vice versa.
    pub fn fft2d(&mut self, mut f: SpectralField<T>, direction: Direction) -> Result<SpectralField<T>> {
        self.transform_lines(&mut f, direction);
        let mut g = self.transpose(&f)?;
        drop(f);
        self.transform_lines(&mut g, direction);
        Ok(g)
    }

    fn apply_phase(&mut self, g: &mut SpectralField<T>, conjugate: bool) {
        let t = self.timers.start();
        let phase = &self.phase;
        g.for_each_mut(|i, j, v| {
            let p = phase[i] * phase[j];
            *v = *v * if conjugate { p.conj() } else { p };
        });
        self.timers.add(Phase::Pointwise, t.elapsed(), 0);
    }

    /// Column-distributed coefficients to row-distributed grid values
    /// `u(n) = sum_k c_k exp(-2 pi i k.n / K_psi)`.
    pub fn to_physical(&mut self, coeffs: SpectralField<T>) -> Result<SpectralField<T>> {
        if coeffs.orientation() != Orientation::Columns {
            return Err(Error::Orientation { expected: "column-distributed" });
        }
        let mut g = self.fft2d(coeffs, Direction::Forward)?;
        self.apply_phase(&mut g, false);
        Ok(g)
    }

    /// Inverse of [`to_physical`](Self::to_physical).
    pub fn from_physical(&mut self, mut grid: SpectralField<T>) -> Result<SpectralField<T>> {
        if grid.orientation() != Orientation::Rows {
            return Err(Error::Orientation { expected: "row-distributed" });
        }
        self.apply_phase(&mut grid, true);
        self.fft2d(grid, Direction::Inverse)
    }

    pub fn symmetrize(&mut self, f: &mut SpectralField<T>, half_width: usize) -> Result<()> {
        self.communicate(Phase::Symmetrize, |c| dist_field::symmetrize(c, f, half_width))
    }

    /// Places a replicated band at its centered storage positions, zeros
    /// elsewhere. Local; no communication.
    pub fn embed_padded(&self, band: &Band<T>) -> Result<SpectralField<T>> {
        let k = band.k();
        if 4 * k + 1 > self.layout.n_psi() {
            return Err(Error::DimensionMismatch { expected: (self.layout.n_psi() - 1) / 4, actual: k });
        }
        let mut f = self.zeros();
        let layout = self.layout;
        let ki = k as i64;
        f.for_each_mut(|i, j, v| {
            let (k1, k2) = (layout.wavenumber(i), layout.wavenumber(j));
            if k1.abs() <= ki && k2.abs() <= ki {
                *v = band.get(k1, k2);
            }
        });
        Ok(f)
    }

    /// Extracts `|k1|, |k2| <= half_width` from a column-distributed field
    /// onto every rank.
    pub fn truncate_band(&mut self, f: &SpectralField<T>, half_width: usize) -> Result<Band<T>> {
        if f.orientation() != Orientation::Columns {
            return Err(Error::Orientation { expected: "column-distributed" });
        }
        let layout = self.layout;
        if half_width > layout.offset() {
            return Err(Error::DimensionMismatch { expected: layout.offset(), actual: half_width });
        }
        let hw = half_width as i64;
        let w = 2 * half_width + 1;
        let in_band = |line: usize| layout.wavenumber(line).abs() <= hw;
        let counts: Vec<usize> = (0..layout.n_ranks())
            .map(|r| (layout.first_line(r)..layout.first_line(r) + layout.k_p()).filter(|&c| in_band(c)).count() * w * 16)
            .collect();
        let mut local = Vec::with_capacity(counts[self.rank()] / 16);
        for l in 0..layout.k_p() {
            if in_band(f.global_line(l)) {
                let col = f.line(l);
                let lo = layout.storage_index(-hw).unwrap();
                local.extend_from_slice(&col[lo..lo + w]);
            }
        }
        let all = self.communicate(Phase::Diagnostics, |c| Ok(c.gather_to_all(&encode_complex(&local), &counts)?))?;
        let data = decode_complex::<T>(&all).ok_or(Error::DimensionMismatch { expected: w * w * 16, actual: all.len() })?;
        Band::from_data(half_width, data).ok_or(Error::DimensionMismatch { expected: w * w, actual: all.len() / 16 })
    }

    /// Truncated linear convolution of two band-limited column-distributed
    /// fields: both go to the grid, multiply, come back, and everything
    /// outside `|k| <= K` is dropped. Wrap-free because `K_psi >= 4K + 1`.
    pub fn convolve(&mut self, a: &SpectralField<T>, b: &SpectralField<T>) -> Result<SpectralField<T>> {
        let ga = self.to_physical(a.clone())?;
        let mut gb = self.to_physical(b.clone())?;
        let t = self.timers.start();
        for (x, y) in gb.local_mut().iter_mut().zip(ga.local()) {
            *x = *x * *y;
        }
        self.timers.add(Phase::Pointwise, t.elapsed(), 0);
        drop(ga);
        let mut c = self.from_physical(gb)?;
        c.truncate_to(self.layout.k());
        Ok(c)
    }

    /// [`convolve`](Self::convolve) on replicated bands.
    pub fn convolve_bands(&mut self, a: &Band<T>, b: &Band<T>) -> Result<Band<T>> {
        let fa = self.embed_padded(a)?;
        let fb = self.embed_padded(b)?;
        let c = self.convolve(&fa, &fb)?;
        self.truncate_band(&c, self.layout.k())
    }

    pub fn gather_full(&mut self, f: &SpectralField<T>) -> Result<Option<Vec<Complex<T>>>> {
        self.communicate(Phase::Diagnostics, |c| dist_field::gather_full(c, f))
    }

    pub fn scatter_full(&mut self, global: Option<&[Complex<T>]>) -> Result<SpectralField<T>> {
        let layout = self.layout;
        self.communicate(Phase::Diagnostics, |c| dist_field::scatter_full(c, layout, global))
    }

    /// Serial version of [`to_physical`](Self::to_physical) on a
    /// column-major global array; used on rank 0 for exports.
    pub fn to_physical_serial(&self, global: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.layout.n_psi();
        assert_eq!(global.len(), n * n);
        let mut a = global.to_vec();
        let mut scratch = vec![czero(); n];
        for col in a.chunks_exact_mut(n) {
            self.forward.process_with_scratch(col, &mut scratch);
        }
        let mut row = vec![czero(); n];
        for i in 0..n {
            for j in 0..n {
                row[j] = a[j * n + i];
            }
            self.forward.process_with_scratch(&mut row, &mut scratch);
            for j in 0..n {
                a[j * n + i] = row[j] * self.phase[i] * self.phase[j];
            }
        }
        a
    }
}
