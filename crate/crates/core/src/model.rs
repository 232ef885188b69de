//! Right-hand side of the expanding-flame equation in Fourier space:
//!
//! ```text
//! dPhi_k/dt = [ -theta^2 |k|^2 / r0^2 + gamma theta |k| / (2 r0) ] Phi_k
//!             - theta^2 / (2 r0^2) * sum_l l.(k - l) Phi_l Phi_{k-l}
//!             + f_k(t)
//! ```
//!
//! Units are nondimensional: lengths in thermal flame widths, time in
//! `gamma^-2` flame transit times.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist_field::{Band, SpectralField};
use crate::error::{Error, Result};
use crate::fft::{Direction, SlowDft, Spectral};
use crate::scalar::{czero, Scalar};
use crate::timing::Phase;

/// Reference radius `r0(t)` of the unperturbed flame.
#[derive(Clone)]
pub enum RadiusSchedule<T> {
    /// `r0(t) = t`; the linear propagator has a closed form.
    Linear,
    /// Any other schedule; the propagator falls back to midpoint quadrature.
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T> fmt::Debug for RadiusSchedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusSchedule::Linear => f.write_str("Linear"),
            RadiusSchedule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Scalar> RadiusSchedule<T> {
    pub fn radius(&self, t: T) -> T {
        match self {
            RadiusSchedule::Linear => t,
            RadiusSchedule::Custom(r) => r(t),
        }
    }
}

/// Switches used by tests and the self-test negative control.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModelHooks {
    pub disable_nonlinear: bool,
    pub flip_linear_sign: bool,
}

#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    /// Density contrast `1 - rho_burnt / rho_unburnt`, in `(0, 1)`.
    pub gamma: T,
    pub theta_pi: u32,
    /// Angular extent of the simulated segment; does not enter the equation.
    pub phi_pi: u32,
    /// Retained-mode half-width.
    pub k: usize,
    /// Initial perturbation amplitude.
    pub epsilon: T,
    pub t0: T,
    pub radius: RadiusSchedule<T>,
    pub hooks: ModelHooks,
}

impl<T: Scalar> ModelParams<T> {
    /// The expanding-flame case: `gamma = 0.8`, `theta_pi = phi_pi = 1`,
    /// `epsilon = 1e-3`, `t0 = 200`, `r0(t) = t`.
    pub fn flame(k: usize) -> Self {
        ModelParams {
            gamma: T::lit(0.8),
            theta_pi: 1,
            phi_pi: 1,
            k,
            epsilon: T::lit(1e-3),
            t0: T::lit(200.0),
            radius: RadiusSchedule::Linear,
            hooks: ModelHooks::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return bad(format!("gamma = {} must lie in (0, 1)", self.gamma));
        }
        if self.theta_pi == 0 || self.phi_pi == 0 {
            return bad("theta_pi and phi_pi must be at least 1".into());
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.epsilon >= T::zero()) {
            return bad(format!("epsilon = {} must be non-negative", self.epsilon));
        }
        if !(self.t0 > T::zero()) {
            return bad(format!("t0 = {} must be positive", self.t0));
        }
        Ok(())
    }

    fn theta(&self) -> T {
        T::from_usize_exact(self.theta_pi as usize)
    }

    fn positive_radius(&self, t: T) -> Result<T> {
        let r = self.radius.radius(t);
        if r > T::zero() {
            Ok(r)
        } else {
            Err(Error::InvalidParameter(format!("reference radius r0({t}) = {r} is not positive")))
        }
    }

    /// Upper end of the unstable band, `|k| = gamma r0 / (2 theta)`.
    pub fn neutral_wavenumber(&self, t: T) -> Result<T> {
        Ok(self.gamma * self.positive_radius(t)? / (T::lit(2.0) * self.theta()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wavevector {
    pub k1: i64,
    pub k2: i64,
}

impl Wavevector {
    pub fn new(k1: i64, k2: i64) -> Self {
        Wavevector { k1, k2 }
    }

    pub fn norm_sqr(&self) -> i64 {
        self.k1 * self.k1 + self.k2 * self.k2
    }

    pub fn norm<T: Scalar>(&self) -> T {
        T::from_i64_exact(self.norm_sqr()).sqrt()
    }
}

/// Fourier components of the upstream velocity perturbation.
pub trait Forcing<T>: Sync {
    fn value(&self, k: Wavevector, t: T) -> Complex<T>;

    fn is_zero(&self) -> bool {
        false
    }
}

/// The unforced case.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl<T: Scalar> Forcing<T> for NoForcing {
    fn value(&self, _k: Wavevector, _t: T) -> Complex<T> {
        czero()
    }

    fn is_zero(&self) -> bool {
        true
    }
}

fn rate_from_norm<T: Scalar>(norm_sqr: T, t: T, p: &ModelParams<T>) -> Result<T> {
    let r0 = p.positive_radius(t)?;
    let th = p.theta();
    let lam = -th * th * norm_sqr / (r0 * r0) + p.gamma * th * norm_sqr.sqrt() / (T::lit(2.0) * r0);
    Ok(if p.hooks.flip_linear_sign { -lam } else { lam })
}

/// Linear growth rate `lambda(k, t)`.
pub fn linear_rate<T: Scalar>(k: Wavevector, t: T, p: &ModelParams<T>) -> Result<T> {
    rate_from_norm(T::from_i64_exact(k.norm_sqr()), t, p)
}

/// Exponent `int_t^{t+h} lambda(k, s) ds` for a given `|k|^2`.
fn propagator_exponent<T: Scalar>(norm_sqr: T, t: T, h: T, p: &ModelParams<T>) -> Result<T> {
    match p.radius {
        RadiusSchedule::Linear => {
            if !(t > T::zero()) {
                return Err(Error::InvalidParameter(format!("t = {t} must be positive")));
            }
            let th = p.theta();
            // 1/(t+h) - 1/t = -h / (t (t+h)); ln((t+h)/t) = ln_1p(h/t).
            let e = -th * th * norm_sqr * h / (t * (t + h)) + p.gamma * th * norm_sqr.sqrt() / T::lit(2.0) * (h / t).ln_1p();
            Ok(if p.hooks.flip_linear_sign { -e } else { e })
        }
        RadiusSchedule::Custom(_) => Ok(h * rate_from_norm(norm_sqr, t + h / T::lit(2.0), p)?),
    }
}

/// Integrating factor `E = exp(int_t^{t+h} lambda(k, s) ds)`.
///
/// Closed form for `r0(t) = t`; other schedules use the midpoint rule, which
/// is third-order accurate in `h`.
pub fn linear_propagator<T: Scalar>(k: Wavevector, t: T, h: T, p: &ModelParams<T>) -> Result<T> {
    Ok(propagator_exponent(T::from_i64_exact(k.norm_sqr()), t, h, p)?.exp())
}

/// Integrating factors for every local element of the retained band;
/// zero outside it.
pub(crate) fn propagator_field<T: Scalar>(
    sp: &Spectral<T>,
    t: T,
    h: T,
    p: &ModelParams<T>,
) -> Result<Vec<T>> {
    let layout = *sp.layout();
    let k = p.k as i64;
    let mut cache: Vec<Option<T>> = vec![None; (2 * k * k + 1) as usize];
    let mut out = vec![T::zero(); layout.local_len()];
    let f = sp.zeros();
    let mut idx = 0;
    let mut err = None;
    f.for_each(|i, j, _| {
        let (k1, k2) = (layout.wavenumber(i), layout.wavenumber(j));
        if k1.abs() <= k && k2.abs() <= k {
            let n2 = (k1 * k1 + k2 * k2) as usize;
            let e = match cache[n2] {
                Some(e) => e,
                None => match propagator_exponent(T::from_usize_exact(n2), t, h, p) {
                    Ok(x) => {
                        cache[n2] = Some(x.exp());
                        x.exp()
                    }
                    Err(e) => {
                        err.get_or_insert(e);
                        T::zero()
                    }
                },
            };
            out[idx] = e;
        }
        idx += 1;
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Multiplies each element of a column-distributed field by one of its
/// wavenumber components.
fn times_wavenumber<T: Scalar>(phi: &SpectralField<T>, component: usize) -> SpectralField<T> {
    let layout = *phi.layout();
    let mut out = phi.clone();
    out.for_each_mut(|i, j, v| {
        let k = if component == 1 { layout.wavenumber(i) } else { layout.wavenumber(j) };
        *v = *v * T::from_i64_exact(k);
    });
    out
}

/// Quadratic term `-theta^2/(2 r0^2) sum_l l.(k-l) Phi_l Phi_{k-l}` for
/// `|k| <= K`, via `sum_l l.(k-l) Phi_l Phi_{k-l} = (k1 Phi)*(k1 Phi) + (k2 Phi)*(k2 Phi)`.
///
/// Both products are formed on the grid, so one pass needs two forward and
/// one inverse 2D transform. The result is symmetrized.
pub fn nonlinear_term<T: Scalar>(
    sp: &mut Spectral<T>,
    phi: &SpectralField<T>,
    t: T,
    p: &ModelParams<T>,
) -> Result<SpectralField<T>> {
    if p.hooks.disable_nonlinear {
        return Ok(sp.zeros());
    }
    let r0 = p.positive_radius(t)?;
    let th = p.theta();
    let clock = sp.timers().start();
    let a1 = times_wavenumber(phi, 1);
    let a2 = times_wavenumber(phi, 2);
    sp.timers_mut().add(Phase::Pointwise, clock.elapsed(), 0);

    let g1 = sp.to_physical(a1)?;
    let mut g2 = sp.to_physical(a2)?;
    let clock = sp.timers().start();
    for (y, x) in g2.local_mut().iter_mut().zip(g1.local()) {
        *y = *x * *x + *y * *y;
    }
    sp.timers_mut().add(Phase::Pointwise, clock.elapsed(), 0);
    drop(g1);

    let mut c = sp.from_physical(g2)?;
    c.truncate_to(p.k);
    c.scale(-th * th / (T::lit(2.0) * r0 * r0));
    sp.symmetrize(&mut c, p.k)?;
    Ok(c)
}

/// Adds `f_k(t)` to every element of the retained band.
pub(crate) fn add_forcing<T: Scalar>(out: &mut SpectralField<T>, t: T, p: &ModelParams<T>, forcing: &dyn Forcing<T>) {
    if forcing.is_zero() {
        return;
    }
    let layout = *out.layout();
    let k = p.k as i64;
    out.for_each_mut(|i, j, v| {
        let w = Wavevector::new(layout.wavenumber(i), layout.wavenumber(j));
        if w.k1.abs() <= k && w.k2.abs() <= k {
            *v += forcing.value(w, t);
        }
    });
}

/// Full right-hand side `lambda(k, t) Phi_k + N_k(Phi) + f_k(t)`.
pub fn rhs<T: Scalar>(
    sp: &mut Spectral<T>,
    phi: &SpectralField<T>,
    t: T,
    p: &ModelParams<T>,
    forcing: &dyn Forcing<T>,
) -> Result<SpectralField<T>> {
    let mut out = nonlinear_term(sp, phi, t, p)?;
    let layout = *phi.layout();
    let k = p.k as i64;
    let mut err = None;
    let mut lin = phi.clone();
    lin.for_each_mut(|i, j, v| {
        let w = Wavevector::new(layout.wavenumber(i), layout.wavenumber(j));
        if w.k1.abs() <= k && w.k2.abs() <= k {
            match linear_rate(w, t, p) {
                Ok(l) => *v = *v * l,
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        } else {
            *v = czero();
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    out.axpy(T::one(), &lin);
    add_forcing(&mut out, t, p, forcing);
    Ok(out)
}

/// Random initial front `Phi(t0) = epsilon * eta` with `eta` uniform in
/// `[-1, 1]` on a `(2K + 1)^2` grid.
///
/// Rank 0 draws the grid from a ChaCha8 stream seeded with `seed`
/// (column-major order), converts it to band coefficients, enforces the
/// Hermitian rule and scatters. The result does not depend on the rank count.
pub fn initial_condition<T: Scalar>(sp: &mut Spectral<T>, p: &ModelParams<T>, seed: u64) -> Result<SpectralField<T>> {
    if sp.rank() != 0 {
        return sp.scatter_full(None);
    }
    let band = initial_band(p, seed);
    let layout = *sp.layout();
    if 4 * p.k + 1 > layout.n_psi() || p.k != layout.k() {
        let _ = sp.scatter_full(None);
        return Err(Error::DimensionMismatch { expected: layout.k(), actual: p.k });
    }
    let n = layout.n_psi();
    let mut global = vec![czero(); n * n];
    for (k1, k2, v) in band.iter() {
        let (i, j) = (layout.storage_index(k1).unwrap(), layout.storage_index(k2).unwrap());
        global[j * n + i] = v;
    }
    sp.scatter_full(Some(&global))
}

/// The replicated coefficient band behind [`initial_condition`].
pub fn initial_band<T: Scalar>(p: &ModelParams<T>, seed: u64) -> Band<T> {
    let k = p.k;
    let m = 2 * k + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid: Vec<Complex<T>> = (0..m * m)
        .map(|_| {
            let eta: f64 = rng.random_range(-1.0..=1.0);
            Complex::new(p.epsilon * T::from_f64_lossy(eta), T::zero())
        })
        .collect();
    SlowDft::new(m, Direction::Inverse).apply_2d(&mut grid);
    let mut band = Band::zeros(k);
    let ki = k as i64;
    for k2 in -ki..=ki {
        for k1 in -ki..=ki {
            let (a, b) = (k1.rem_euclid(m as i64) as usize, k2.rem_euclid(m as i64) as usize);
            band.set(k1, k2, grid[b * m + a]);
        }
    }
    band.symmetrize();
    band
}
