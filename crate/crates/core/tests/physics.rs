mod common;

use common::{on_ranks, random_hermitian};
use flame_core::dist_field::SpectralField;
use flame_core::integrator::{run, step_ifrk2, IntegratorConfig, Observer};
use flame_core::model::{initial_band, initial_condition, linear_propagator, ModelParams, NoForcing, Wavevector};
use flame_core::{Band64, Error, Params, Spectral64};
use num_complex::Complex;

fn single_mode(sp: &Spectral64, k1: i64, k2: i64, v: f64) -> SpectralField<f64> {
    let mut f = sp.zeros();
    for (a, b) in [(k1, k2), (-k1, -k2)] {
        if let Some(x) = f.get_k_mut(a, b) {
            *x = Complex::new(v, 0.0);
        }
    }
    f
}

fn advance(sp: &mut Spectral64, mut phi: SpectralField<f64>, t0: f64, h: f64, n: usize, p: &Params) -> Result<SpectralField<f64>, Error> {
    let mut t = t0;
    for _ in 0..n {
        phi = step_ifrk2(sp, &phi, t, h, p, &NoForcing)?;
        t += h;
    }
    Ok(phi)
}

#[test]
fn most_unstable_mode_follows_propagator_product() {
    // k = (40, 0) only couples to the zero mode and to |k| = 80, both with
    // zero weight back onto itself, so it evolves linearly.
    let k = 40;
    let p = ModelParams::flame(k);
    let (h, n) = (0.01, 10);
    let amp = on_ranks(2, k, |sp| {
        let phi = single_mode(sp, 40, 0, 1e-3);
        let out = advance(sp, phi, 200.0, h, n, &p)?;
        let b = sp.truncate_band(&out, k)?;
        Ok(b.get(40, 0))
    });
    let mut want = 1e-3;
    let mut t = 200.0;
    for _ in 0..n {
        want *= linear_propagator(Wavevector::new(40, 0), t, h, &p).unwrap();
        t += h;
    }
    assert!((amp.re - want).abs() <= 1e-10 * want, "{} vs {want}", amp.re);
    assert!(amp.im.abs() <= 1e-10 * want);
    assert!(want > 1e-3);
}

#[test]
fn band_boundary_separates_growth_from_decay() {
    let k = 81;
    let p = ModelParams::flame(k);
    for (q, grows) in [(79, true), (81, false), (20, true), (0, false)] {
        let a = on_ranks(1, k, |sp| {
            let phi = single_mode(sp, q, 0, 1e-3);
            let out = advance(sp, phi, 200.0, 0.01, 10, &p)?;
            Ok(sp.truncate_band(&out, k)?.get(q, 0).re)
        });
        if q == 0 {
            assert_eq!(a, 1e-3);
        } else {
            assert_eq!(a > 1e-3, grows, "q={q}: {a}");
        }
    }
}

fn order_run(h: f64, phi: &Band64, p: &Params) -> Band64 {
    let n = (0.2 / h).round() as usize;
    on_ranks(2, 4, |sp| {
        let f = sp.embed_padded(phi)?;
        let out = advance(sp, f, 1.0, h, n, p)?;
        sp.truncate_band(&out, 4)
    })
}

#[test]
fn heun_step_is_second_order() {
    // Small t0 makes the quadratic term comparable to the linear one.
    let mut p = ModelParams::flame(4);
    p.t0 = 1.0;
    for seed in [1, 2, 3] {
        let phi = random_hermitian(4, 0.1, seed);
        let a = order_run(1e-2, &phi, &p);
        let b = order_run(5e-3, &phi, &p);
        let c = order_run(2.5e-3, &phi, &p);
        let order = (a.max_abs_diff(&b) / b.max_abs_diff(&c)).log2();
        assert!(order >= 1.9, "seed {seed}: order {order}");
    }
}

#[test]
fn run_equals_manual_steps_bit_exactly() {
    let k = 6;
    let p = ModelParams::flame(k);
    let (manual, looped) = on_ranks(3, k, |sp| {
        let phi = initial_condition(sp, &p, 9)?;
        let manual = advance(sp, phi.clone(), 200.0, 0.05, 7, &p)?;
        let cfg = IntegratorConfig::new(0.05, 200.0 + 7.0 * 0.05);
        let looped = run(sp, phi, 200.0, 0, &cfg, &p, &NoForcing, &mut ())?;
        assert_eq!(looped.step, 7);
        Ok((sp.gather_full(&manual)?, sp.gather_full(&looped.phi)?))
    });
    assert_eq!(manual, looped);
}

#[test]
fn trajectories_agree_across_rank_counts() {
    let k = 8;
    let mut p = ModelParams::flame(k);
    p.epsilon = 0.5;
    let traj = |np: usize| {
        on_ranks(np, k, |sp| {
            let phi = initial_condition(sp, &p, 4)?;
            let out = advance(sp, phi, 200.0, 0.1, 10, &p)?;
            sp.truncate_band(&out, k)
        })
    };
    let base = traj(1);
    assert_eq!(base, traj(1));
    for np in [2, 4] {
        assert!(common::rel_diff(&traj(np), &base) <= 1e-10, "np={np}");
    }
}

#[test]
fn steps_stay_hermitian() {
    let k = 5;
    let p = ModelParams::flame(k);
    let band = on_ranks(2, k, |sp| {
        let phi = initial_condition(sp, &p, 12)?;
        let out = advance(sp, phi, 200.0, 0.5, 4, &p)?;
        sp.truncate_band(&out, k)
    });
    let mut sym = band.clone();
    sym.symmetrize();
    assert_eq!(sym, band);
}

#[test]
fn initial_condition_is_rank_independent() {
    let k = 6;
    let p = ModelParams::flame(k);
    let want = initial_band(&p, 3);
    for np in [1, 2, 3, 4] {
        let got = on_ranks(np, k, |sp| {
            let f = initial_condition(sp, &p, 3)?;
            sp.truncate_band(&f, k)
        });
        assert_eq!(got, want, "np={np}");
    }
}

struct Recorder {
    outputs: Vec<(u64, f64)>,
    checkpoints: Vec<u64>,
}

impl Observer<f64> for Recorder {
    fn output(&mut self, _sp: &mut Spectral64, step: u64, t: f64, _phi: &SpectralField<f64>) -> flame_core::Result<()> {
        self.outputs.push((step, t));
        Ok(())
    }

    fn checkpoint(&mut self, _sp: &mut Spectral64, step: u64, _t: f64, _phi: &SpectralField<f64>) -> flame_core::Result<()> {
        self.checkpoints.push(step);
        if step == 9 {
            return Err(Error::Callback("disk full".into()));
        }
        Ok(())
    }
}

#[test]
fn observers_fire_on_schedule_and_errors_stop_the_run() {
    let p = ModelParams::flame(2);
    let rec = on_ranks(1, 2, |sp| {
        let mut rec = Recorder { outputs: vec![], checkpoints: vec![] };
        let mut cfg = IntegratorConfig::new(0.25, 202.0);
        cfg.output_every = 2;
        cfg.checkpoint_every = 3;
        let phi = sp.zeros();
        let out = run(sp, phi.clone(), 200.0, 0, &cfg, &p, &NoForcing, &mut rec)?;
        assert_eq!(out.step, 8);
        assert_eq!(out.t, 202.0);
        let err = run(sp, phi, 200.0, 0, &IntegratorConfig { t_end: 203.0, ..cfg }, &p, &NoForcing, &mut rec);
        assert!(matches!(err, Err(Error::Callback(_))));
        Ok(rec)
    });
    assert_eq!(&rec.outputs[..4], &[(2, 200.5), (4, 201.0), (6, 201.5), (8, 202.0)]);
    assert_eq!(rec.checkpoints, vec![3, 6, 3, 6, 9]);
}
