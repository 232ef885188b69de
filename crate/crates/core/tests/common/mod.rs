#![allow(dead_code)]

use flame_core::comm::{spawn_inprocess, Communicator};
use flame_core::dist_field::{Band, Layout, TransposeStrategy};
use flame_core::fft::Spectral;
use flame_core::Error;
use num_complex::Complex;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_values(n: usize, seed: u64) -> Vec<Complex<f64>> {
    let mut r = rng(seed);
    (0..n).map(|_| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect()
}

/// Random band with the Hermitian rule enforced.
pub fn random_hermitian(k: usize, amplitude: f64, seed: u64) -> Band<f64> {
    let w = 2 * k + 1;
    let data = random_values(w * w, seed).into_iter().map(|v| v * amplitude).collect();
    let mut b = Band::from_data(k, data).unwrap();
    b.symmetrize();
    b
}

pub fn spectral(comm: Communicator, k: usize) -> Spectral<f64> {
    let layout = Layout::build(k, comm.size()).unwrap();
    Spectral::new(comm, layout, TransposeStrategy::AllToAll).unwrap()
}

/// Runs `f` on `np` in-process ranks with a spectral context for `k`
/// and returns rank 0's result.
pub fn on_ranks<R: Send>(np: usize, k: usize, f: impl Fn(&mut Spectral<f64>) -> Result<R, Error> + Sync) -> R {
    let mut out = spawn_inprocess(np, |comm| {
        let mut sp = spectral(comm, k);
        f(&mut sp)
    })
    .unwrap_or_else(|e| panic!("{e}"));
    out.swap_remove(0)
}

pub fn rel_diff(a: &Band<f64>, b: &Band<f64>) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(f64::MIN_POSITIVE)
}
