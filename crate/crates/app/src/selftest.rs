//! `flame selftest`: oracle suites at desk scale.

use std::fmt::Write as _;

use flame_core::comm::spawn_inprocess;
use flame_core::diagnostics::fit_power_law;
use flame_core::dist_field::{self, Band, Layout, TransposeStrategy};
use flame_core::fft::{dft_1d, Direction};
use flame_core::integrator::step_ifrk2;
use flame_core::model::{nonlinear_term, ModelHooks, ModelParams, NoForcing};
use flame_core::oracle::{direct_convolution, direct_dft, direct_dft_2d, direct_quadratic_sum, serial_transpose};
use flame_core::scalar::{decode_complex, encode_complex};
use flame_core::{Band64, Cplx, Error, Series, Spectral64};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RANK_COUNTS: [usize; 3] = [1, 2, 4];
const K_MAX: usize = 8;

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    /// Flips the sign of the linear growth rate (negative control).
    pub inject_sign_error: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestRow {
    pub suite: &'static str,
    pub n_ranks: usize,
    pub passed: bool,
    pub detail: String,
}

pub fn table(rows: &[SelftestRow]) -> String {
    let mut s = format!("{:<14} {:>4}  {:<6} {}\n", "suite", "N_p", "result", "detail");
    for r in rows {
        let _ = writeln!(s, "{:<14} {:>4}  {:<6} {}", r.suite, r.n_ranks, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    s
}

fn random_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<Cplx<f64>> {
    (0..n).map(|_| Cplx::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn random_band(k: usize, seed: u64) -> Band64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 2 * k + 1;
    let mut b = Band::from_data(k, random_values(w * w, &mut rng)).expect("square band");
    b.symmetrize();
    b
}

fn max_norm(v: &[Cplx<f64>]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn rel_err(a: &[Cplx<f64>], b: &[Cplx<f64>]) -> f64 {
    let d: Vec<_> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_norm(&d) / max_norm(b).max(f64::MIN_POSITIVE)
}

/// Runs `f` on `np` ranks; rank 0's value.
fn on_ranks<R: Send>(np: usize, k: usize, f: impl Fn(&mut Spectral64) -> Result<R, Error> + Sync) -> Result<R, Error> {
    let mut out = spawn_inprocess(np, |comm| {
        let layout = Layout::build(k, comm.size())?;
        let mut sp = Spectral64::new(comm, layout, TransposeStrategy::AllToAll)?;
        f(&mut sp)
    })
    .map_err(|g| match g.into_root_cause() {
        flame_core::comm::RankFailure::Error(e) => e,
        flame_core::comm::RankFailure::Panic(m) => Error::Callback(m),
    })?;
    Ok(out.swap_remove(0))
}

type Check = Result<(bool, String), Error>;

fn dft_suite(np: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for n in [2, 3, 5, 12, 30, 36, 60] {
        let x = random_values(n, &mut rng);
        for dir in [Direction::Forward, Direction::Inverse] {
            worst = worst.max(rel_err(&dft_1d(&x, dir)?, &direct_dft(&x, dir)));
        }
    }
    let k = 7;
    let n = Layout::build(k, np)?.n_psi();
    let global = random_values(n * n, &mut rng);
    let got = on_ranks(np, k, |sp| {
        let root = sp.rank() == 0;
        let f = sp.scatter_full(root.then_some(global.as_slice()))?;
        let g = sp.fft2d(f, Direction::Forward)?;
        sp.gather_full(&g)
    })?
    .expect("rank 0 gathers");
    worst = worst.max(rel_err(&got, &direct_dft_2d(&global, n, Direction::Forward)));
    Ok((worst <= 1e-12, format!("max rel err {worst:.1e}")))
}

fn convolution_suite(np: usize) -> Check {
    let mut worst: f64 = 0.0;
    for k in 1..=6 {
        let a = random_band(k, 10 + k as u64);
        let b = random_band(k, 20 + k as u64);
        let p = ModelParams::<f64>::flame(k);
        let (conv, nl) = on_ranks(np, k, |sp| {
            let c = sp.convolve_bands(&a, &b)?;
            let f = sp.embed_padded(&a)?;
            let n = nonlinear_term(sp, &f, p.t0, &p)?;
            Ok((c, sp.truncate_band(&n, k)?))
        })?;
        let want = direct_convolution(&a, &b);
        worst = worst.max(conv.max_abs_diff(&want) / want.max_abs());
        let mut q = direct_quadratic_sum(&a);
        let s = -1.0 / (2.0 * p.t0 * p.t0);
        q.data_mut().iter_mut().for_each(|v| *v *= s);
        worst = worst.max(nl.max_abs_diff(&q) / q.max_abs());
    }
    Ok((worst <= 1e-12, format!("max rel err {worst:.1e}")))
}

fn transpose_suite(np: usize) -> Check {
    let mut checked = 0;
    for k in 1..=K_MAX {
        let layout = Layout::build(k, np)?;
        let n = layout.n_psi();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let global = random_values(n * n, &mut rng);
        for strategy in [TransposeStrategy::AllToAll, TransposeStrategy::Gather] {
            let ok = on_ranks(np, k, |sp| {
                let root = sp.rank() == 0;
                let f = sp.scatter_full(root.then_some(global.as_slice()))?;
                let comm = sp.comm_mut();
                let g = dist_field::transpose(comm, &f, strategy)?;
                let back = dist_field::transpose(comm, &g, strategy)?;
                let counts = vec![layout.local_len() * 16; np];
                let lines = comm.gather_to(0, &encode_complex(g.local()), &counts)?;
                let same = comm.all_reduce_sum(&[(back.local() == f.local()) as u8 as f64])?[0] == np as f64;
                Ok(lines.map(|b| same && decode_complex::<f64>(&b).expect("whole elements") == serial_transpose(&global, n, n)))
            })?;
            if ok != Some(true) {
                return Ok((false, format!("K = {k}, {strategy}: mismatch")));
            }
            checked += 1;
        }
    }
    Ok((true, format!("{checked} cases exact")))
}

fn realness_suite(np: usize) -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let k = 2 + seed as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let w = 2 * k + 1;
        let raw = Band::from_data(k, random_values(w * w, &mut rng)).expect("square band");
        let grid = on_ranks(np, k, |sp| {
            let mut f = sp.embed_padded(&raw)?;
            sp.symmetrize(&mut f, k)?;
            let g = sp.to_physical(f)?;
            sp.gather_full(&g)
        })?
        .expect("rank 0 gathers");
        let re = grid.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let im = grid.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        worst = worst.max(im / re);
    }
    Ok((worst <= 1e-12, format!("max |im|/|re| {worst:.1e}")))
}

/// Closed-form integrating factor for `r0(t) = t`, written out here
/// independently of the model code.
fn propagator_oracle(q: f64, t: f64, h: f64, gamma: f64) -> f64 {
    (q * q * (1.0 / (t + h) - 1.0 / t) + gamma * q / 2.0 * ((t + h) / t).ln()).exp()
}

fn linear_suite(np: usize, opts: SelftestOptions) -> Check {
    // t0 = 16 puts the band edge gamma r0 / 2 = 6.4 inside K = 8.
    let k = K_MAX;
    let mut p = ModelParams::<f64>::flame(k);
    p.t0 = 16.0;
    p.hooks = ModelHooks { disable_nonlinear: false, flip_linear_sign: opts.inject_sign_error };
    let (h, steps, a0) = (0.01, 10, 1e-6);
    let mut worst: f64 = 0.0;
    let mut signs_ok = true;
    for (q, grows) in [(3i64, true), (7, false)] {
        let amp = on_ranks(np, k, |sp| {
            let mut phi = sp.zeros();
            for s in [q, -q] {
                if let Some(v) = phi.get_k_mut(s, 0) {
                    *v = Cplx::new(a0, 0.0);
                }
            }
            let mut t = p.t0;
            for _ in 0..steps {
                phi = step_ifrk2(sp, &phi, t, h, &p, &NoForcing)?;
                t += h;
            }
            Ok(sp.truncate_band(&phi, k)?.get(q, 0).re)
        })?;
        let mut want = a0;
        let mut t = p.t0;
        for _ in 0..steps {
            want *= propagator_oracle(q as f64, t, h, p.gamma);
            t += h;
        }
        worst = worst.max((amp - want).abs() / want);
        signs_ok &= (amp > a0) == grows;
    }
    Ok((worst <= 1e-10 && signs_ok, format!("max rel err {worst:.1e}, growth/decay {}", if signs_ok { "ok" } else { "wrong" })))
}

fn power_law_suite() -> Check {
    let mut worst: f64 = 0.0;
    for alpha in [0.25, 0.5, 0.76] {
        let t: Vec<f64> = (0..64).map(|i| 10.0 + 90.0 * i as f64 / 63.0).collect();
        let v = t.iter().map(|&t| 1.5 * (t - 4.0).powf(alpha)).collect();
        let fit = fit_power_law(&Series::new(t, v)?)?;
        worst = worst.max((fit.alpha - alpha).abs() / alpha).max((fit.t_star - 4.0).abs() / 4.0);
    }
    Ok((worst <= 1e-5, format!("max rel err {worst:.1e}")))
}

/// Runs every suite; the distributed ones at each of [`RANK_COUNTS`].
pub fn run_selftest(opts: SelftestOptions) -> Vec<SelftestRow> {
    let mut rows = Vec::new();
    let mut push = |suite: &'static str, np: usize, r: Check| {
        let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
        rows.push(SelftestRow { suite, n_ranks: np, passed, detail });
    };
    for np in RANK_COUNTS {
        push("dft", np, dft_suite(np));
        push("convolution", np, convolution_suite(np));
        push("transpose", np, transpose_suite(np));
        push("realness", np, realness_suite(np));
        push("linear_growth", np, linear_suite(np, opts));
    }
    push("power_law", 1, power_law_suite());
    rows
}
