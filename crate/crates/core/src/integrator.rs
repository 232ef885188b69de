//! Integrating-factor Heun time stepping.
//!
//! The stiff linear term is integrated exactly through
//! [`linear_propagator`](crate::model::linear_propagator); the quadratic and
//! forcing terms get an explicit second-order predictor/corrector.
//! Accuracy guideline: `h <= 0.5 / max_k |lambda(k, t0)|`.

use crate::dist_field::SpectralField;
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::model::{add_forcing, nonlinear_term, propagator_field, Forcing, ModelParams};
use crate::scalar::Scalar;
use crate::timing::Phase;

/// Any coefficient larger than this aborts the run.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub h: T,
    pub t_end: T,
    /// Steps between [`Observer::output`] calls.
    pub output_every: u64,
    /// Steps between symmetrization passes.
    pub symmetrize_every: u64,
    /// Steps between [`Observer::checkpoint`] calls; 0 disables them.
    pub checkpoint_every: u64,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn new(h: T, t_end: T) -> Self {
        IntegratorConfig { h, t_end, output_every: 1, symmetrize_every: 1, checkpoint_every: 0 }
    }

    pub fn validate(&self, t0: T) -> Result<()> {
        if !(self.h > T::zero()) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!("time step h = {} must be positive", self.h)));
        }
        if !(self.t_end >= t0) {
            return Err(Error::InvalidParameter(format!("t_end = {} precedes t0 = {}", self.t_end, t0)));
        }
        if self.output_every == 0 || self.symmetrize_every == 0 {
            return Err(Error::InvalidParameter("output_every and symmetrize_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps from `t` to `t_end`, rounded to the nearest integer.
    pub fn steps_from(&self, t: T) -> u64 {
        let n = ((self.t_end - t) / self.h).round();
        if n > T::zero() {
            n.to_f64_lossy() as u64
        } else {
            0
        }
    }
}

/// Hooks called by [`run`] on every rank; all ranks must return the same
/// kind of result since the methods may communicate.
pub trait Observer<T: Scalar> {
    fn output(&mut self, _sp: &mut Spectral<T>, _step: u64, _t: T, _phi: &SpectralField<T>) -> Result<()> {
        Ok(())
    }

    fn checkpoint(&mut self, _sp: &mut Spectral<T>, _step: u64, _t: T, _phi: &SpectralField<T>) -> Result<()> {
        Ok(())
    }
}

impl<T: Scalar> Observer<T> for () {}

/// Quadratic term plus forcing.
fn explicit_part<T: Scalar>(
    sp: &mut Spectral<T>,
    phi: &SpectralField<T>,
    t: T,
    p: &ModelParams<T>,
    forcing: &dyn Forcing<T>,
) -> Result<SpectralField<T>> {
    let mut n = nonlinear_term(sp, phi, t, p)?;
    add_forcing(&mut n, t, p, forcing);
    Ok(n)
}

fn times_propagator<T: Scalar>(f: &mut SpectralField<T>, e: &[T]) {
    for (v, &e) in f.local_mut().iter_mut().zip(e) {
        *v = *v * e;
    }
}

fn heun<T: Scalar>(
    sp: &mut Spectral<T>,
    phi: &SpectralField<T>,
    t: T,
    h: T,
    p: &ModelParams<T>,
    forcing: &dyn Forcing<T>,
    symmetrize: bool,
) -> Result<SpectralField<T>> {
    let clock = sp.timers().start();
    let e = propagator_field(sp, t, h, p)?;
    sp.timers_mut().add(Phase::Integrate, clock.elapsed(), 0);

    let n1 = explicit_part(sp, phi, t, p, forcing)?;
    let clock = sp.timers().start();
    let mut pred = phi.clone();
    pred.axpy(h, &n1);
    times_propagator(&mut pred, &e);
    sp.timers_mut().add(Phase::Integrate, clock.elapsed(), 0);

    let n2 = explicit_part(sp, &pred, t + h, p, forcing)?;
    let clock = sp.timers().start();
    let half = h / T::lit(2.0);
    let mut out = pred;
    {
        let (x, a, b) = (phi.local(), n1.local(), n2.local());
        for (idx, o) in out.local_mut().iter_mut().enumerate() {
            *o = x[idx] * e[idx] + (a[idx] * e[idx] + b[idx]) * half;
        }
    }
    sp.timers_mut().add(Phase::Integrate, clock.elapsed(), 0);
    if symmetrize {
        sp.symmetrize(&mut out, p.k)?;
    }
    Ok(out)
}

fn check_finite<T: Scalar>(sp: &mut Spectral<T>, phi: &SpectralField<T>, step: u64, t: T) -> Result<()> {
    let m = phi.local_max_abs().to_f64_lossy();
    let bad = if m.is_finite() && m <= BLOW_UP_THRESHOLD { 0.0 } else { 1.0 };
    let worst = if m.is_finite() { m } else { f64::INFINITY };
    let r = sp.communicate(Phase::Integrate, |c| Ok(c.all_reduce_sum(&[bad])?))?;
    if r[0] > 0.0 {
        return Err(Error::BlowUp {
            step,
            t: t.to_f64_lossy(),
            detail: format!("{} rank(s) hold coefficients beyond {BLOW_UP_THRESHOLD:e} (local max {worst:e} on rank {})", r[0], sp.rank()),
        });
    }
    Ok(())
}

/// One integrating-factor Heun step from `t` to `t + h`:
///
/// ```text
/// N1 = N(phi, t);  phi* = E (phi + h N1);  N2 = N(phi*, t + h)
/// phi(t + h) = E phi + h/2 (E N1 + N2)
/// ```
///
/// with `E = exp(int_t^{t+h} lambda)` and `N` the quadratic term plus
/// forcing. The result is symmetrized. Exact when `N` vanishes.
pub fn step_ifrk2<T: Scalar>(
    sp: &mut Spectral<T>,
    phi: &SpectralField<T>,
    t: T,
    h: T,
    p: &ModelParams<T>,
    forcing: &dyn Forcing<T>,
) -> Result<SpectralField<T>> {
    let out = heun(sp, phi, t, h, p, forcing, true)?;
    check_finite(sp, &out, 1, t + h)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOutcome<T: Scalar> {
    pub phi: SpectralField<T>,
    pub t: T,
    /// Index of the last completed step.
    pub step: u64,
}

/// Advances `phi0` from `(t0, first_step)` to `config.t_end`.
///
/// Time accumulates as `t += h`, so a run resumed from a checkpoint of the
/// same run continues bit-exactly. Steps are numbered from `first_step + 1`;
/// observers see the step index and the time after the step.
#[allow(clippy::too_many_arguments)]
pub fn run<T: Scalar>(
    sp: &mut Spectral<T>,
    phi0: SpectralField<T>,
    t0: T,
    first_step: u64,
    config: &IntegratorConfig<T>,
    p: &ModelParams<T>,
    forcing: &dyn Forcing<T>,
    observer: &mut dyn Observer<T>,
) -> Result<RunOutcome<T>> {
    config.validate(t0)?;
    p.validate()?;
    let n = config.steps_from(t0);
    let mut phi = phi0;
    let mut t = t0;
    for s in 1..=n {
        let step = first_step + s;
        let sym = step % config.symmetrize_every == 0;
        phi = heun(sp, &phi, t, config.h, p, forcing, sym)?;
        t += config.h;
        check_finite(sp, &phi, step, t)?;
        if step % config.output_every == 0 {
            observer.output(sp, step, t, &phi)?;
        }
        if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 {
            observer.checkpoint(sp, step, t, &phi)?;
        }
    }
    Ok(RunOutcome { phi, t, step: first_step + n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::spawn_inprocess;
    use crate::dist_field::{Layout, TransposeStrategy};
    use crate::model::{linear_propagator, ModelHooks, NoForcing, Wavevector};
    use num_complex::Complex;

    fn ctx(comm: crate::comm::Communicator, k: usize) -> Spectral<f64> {
        let layout = Layout::build(k, comm.size()).unwrap();
        Spectral::new(comm, layout, TransposeStrategy::AllToAll).unwrap()
    }

    fn single_mode(sp: &Spectral<f64>, k1: i64, k2: i64, v: f64) -> SpectralField<f64> {
        let mut f = sp.zeros();
        for (a, b) in [(k1, k2), (-k1, -k2)] {
            if let Some(x) = f.get_k_mut(a, b) {
                *x = Complex::new(v, 0.0);
            }
        }
        f
    }

    #[test]
    fn linear_step_is_exact() {
        spawn_inprocess(2, |comm| {
            let mut sp = ctx(comm, 4);
            let mut p = ModelParams::flame(4);
            p.hooks = ModelHooks { disable_nonlinear: true, ..Default::default() };
            let phi = single_mode(&sp, 3, 1, 0.5);
            let out = step_ifrk2(&mut sp, &phi, 200.0, 0.1, &p, &NoForcing)?;
            let e = linear_propagator(Wavevector::new(3, 1), 200.0, 0.1, &p).unwrap();
            if let Some(v) = out.get_k(3, 1) {
                assert_eq!(v, Complex::new(0.5 * e, 0.0));
            }
            Ok::<_, Error>(())
        })
        .unwrap();
    }

    #[test]
    fn zero_stays_zero() {
        spawn_inprocess(1, |comm| {
            let mut sp = ctx(comm, 3);
            let p = ModelParams::flame(3);
            let zero = sp.zeros();
            let out = step_ifrk2(&mut sp, &zero, 200.0, 0.1, &p, &NoForcing)?;
            assert!(out.local().iter().all(|v| *v == Complex::new(0.0, 0.0)));
            Ok::<_, Error>(())
        })
        .unwrap();
    }

    #[test]
    fn empty_run_returns_input() {
        spawn_inprocess(1, |comm| {
            let mut sp = ctx(comm, 2);
            let p = ModelParams::flame(2);
            let phi = single_mode(&sp, 1, 0, 0.1);
            let cfg = IntegratorConfig::new(0.1, 200.0);
            let out = run(&mut sp, phi.clone(), 200.0, 0, &cfg, &p, &NoForcing, &mut ())?;
            assert_eq!(out.step, 0);
            assert_eq!(out.phi.local(), phi.local());
            Ok::<_, Error>(())
        })
        .unwrap();
    }

    #[test]
    fn huge_step_blows_up_on_every_rank() {
        let err = spawn_inprocess(2, |comm| {
            let mut sp = ctx(comm, 3);
            let p = ModelParams::flame(3);
            let phi = single_mode(&sp, 1, 1, 1e3);
            let cfg = IntegratorConfig::new(1e4, 200.0 + 5e4);
            run(&mut sp, phi, 200.0, 0, &cfg, &p, &NoForcing, &mut ()).map(|_| ())
        })
        .unwrap_err();
        assert_eq!(err.failures.len(), 2);
        assert!(matches!(err.into_root_cause(), crate::comm::RankFailure::Error(Error::BlowUp { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 1.0).validate(0.5).is_err());
        assert!(IntegratorConfig::new(0.1, 0.4).validate(0.5).is_err());
        assert_eq!(IntegratorConfig::new(0.1, 201.0).steps_from(200.0), 10);
    }
}
