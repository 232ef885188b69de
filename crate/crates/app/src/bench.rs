//! `flame bench-transpose` and `flame speedup`.

use std::fmt::Write as _;
use std::time::Instant;

use flame_core::comm::{spawn_inprocess, Communicator};
use flame_core::dist_field::{self, Layout, SpectralField, TransposeStrategy};
use flame_core::integrator::step_ifrk2;
use flame_core::model::{initial_condition, NoForcing};
use flame_core::oracle::serial_transpose;
use flame_core::scalar::{decode_complex, encode_complex};
use flame_core::timing::Phase;
use flame_core::{Cplx, Error, Spectral64};

use crate::{timeout_override, AppError, RunConfig};

pub const WARMUP: usize = 3;
pub const REPEATS: usize = 11;

/// Complex elements one global transpose must move, `K_psi^2 (1 - 1/N_p)`.
pub fn expected_elements(n_psi: usize, n_ranks: usize) -> u64 {
    let n = n_psi as u64;
    n * n - n * n / n_ranks as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_psi: usize,
    pub n_ranks: usize,
    pub strategy: TransposeStrategy,
    /// Median over [`REPEATS`] timed transposes.
    pub seconds: f64,
    /// Complex elements received by all ranks in one transpose.
    pub elements: u64,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("k_psi,n_p,strategy,seconds,elements\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.16e},{}", r.n_psi, r.n_ranks, r.strategy, r.seconds, r.elements);
    }
    s
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn pseudo_field(layout: Layout, rank: usize) -> SpectralField<f64> {
    let mut f = SpectralField::zeros(layout, rank, dist_field::Orientation::Columns);
    let n = layout.n_psi();
    f.for_each_mut(|i, j, v| *v = Cplx::new((j * n + i) as f64, -(i as f64)));
    f
}

fn line_matrix(comm: &mut Communicator, f: &SpectralField<f64>) -> Result<Option<Vec<Cplx<f64>>>, Error> {
    let counts = vec![f.layout().local_len() * 16; comm.size()];
    let bytes = comm.gather_to(0, &encode_complex(f.local()), &counts)?;
    Ok(bytes.map(|b| decode_complex(&b).expect("whole elements")))
}

struct RankResult {
    seconds: Vec<f64>,
    elements: u64,
    verified: Option<bool>,
    result: Option<Vec<Cplx<f64>>>,
}

fn bench_one(comm: &mut Communicator, layout: Layout, strategy: TransposeStrategy, verify: bool) -> Result<RankResult, Error> {
    let f = pseudo_field(layout, comm.rank());
    for _ in 0..WARMUP {
        dist_field::transpose(comm, &f, strategy)?;
    }
    let mut seconds = Vec::with_capacity(REPEATS);
    let mut elements = 0.0;
    let mut g = None;
    for _ in 0..REPEATS {
        comm.barrier()?;
        let before = comm.counters();
        let clock = Instant::now();
        let out = dist_field::transpose(comm, &f, strategy)?;
        seconds.push(clock.elapsed().as_secs_f64());
        elements = comm.counters().since(&before).complex_received() as f64;
        g = Some(out);
    }
    let total = comm.all_reduce_sum(&[elements])?[0] as u64;
    let g = g.expect("at least one repeat");
    let (mut verified, mut result) = (None, None);
    if verify {
        let before = line_matrix(comm, &f)?;
        let after = line_matrix(comm, &g)?;
        if let (Some(b), Some(a)) = (before, after) {
            let n = layout.n_psi();
            verified = Some(a == serial_transpose(&b, n, n));
            result = Some(a);
        }
    }
    Ok(RankResult { seconds, elements: total, verified, result })
}

/// Times repeated transposes for every `K` in `cfg.sizes` (default
/// `cfg.k`) with both strategies on `cfg.n_ranks` in-process ranks.
///
/// Checks the smallest size against the serial oracle, that both strategies
/// agree, and that every element count equals `K_psi^2 (1 - 1/N_p)`.
pub fn cmd_bench_transpose(cfg: &RunConfig) -> Result<Vec<BenchRow>, AppError> {
    let mut sizes = if cfg.sizes.is_empty() { vec![cfg.k] } else { cfg.sizes.clone() };
    sizes.sort_unstable();
    sizes.dedup();
    let np = cfg.n_ranks;
    let timeout = timeout_override()?;
    let mut rows = Vec::new();
    for (idx, &k) in sizes.iter().enumerate() {
        let layout = Layout::build(k, np)?;
        let verify = idx == 0;
        let mut results = Vec::new();
        for strategy in [TransposeStrategy::AllToAll, TransposeStrategy::Gather] {
            let mut out = spawn_inprocess(np, |mut comm| {
                if let Some(t) = timeout {
                    comm.set_timeout(t);
                }
                bench_one(&mut comm, layout, strategy, verify)
            })?;
            let r0 = out.swap_remove(0);
            if r0.verified == Some(false) {
                return Err(AppError::Other(format!("{strategy} transpose disagrees with the serial oracle at K_psi = {}", layout.n_psi())));
            }
            let want = expected_elements(layout.n_psi(), np);
            if r0.elements != want {
                return Err(AppError::Other(format!(
                    "{strategy} transpose moved {} elements, expected {want} (K_psi = {}, N_p = {np})",
                    r0.elements,
                    layout.n_psi()
                )));
            }
            results.push(r0.result);
            rows.push(BenchRow { n_psi: layout.n_psi(), n_ranks: np, strategy, seconds: median(r0.seconds), elements: r0.elements });
        }
        if verify && results[0] != results[1] {
            return Err(AppError::Other("alltoall and gather transposes disagree".into()));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub n_ranks: usize,
    pub n_psi: usize,
    pub seconds: f64,
    /// Baseline seconds over this row's seconds.
    pub speedup: f64,
    pub transposes: u64,
    /// Complex elements received by all ranks per transpose.
    pub elements_per_transpose: u64,
}

pub fn speedup_csv(rows: &[SpeedupRow]) -> String {
    let mut s = String::from("n_p,k_psi,seconds,speedup,transposes,elements_per_transpose\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{},{}",
            r.n_ranks, r.n_psi, r.seconds, r.speedup, r.transposes, r.elements_per_transpose
        );
    }
    s
}

fn speedup_rank(comm: Communicator, cfg: &RunConfig) -> Result<(f64, u64, u64, usize), Error> {
    let layout = Layout::build(cfg.k, comm.size())?;
    let mut sp = Spectral64::new(comm, layout, cfg.transpose_strategy)?;
    let p = cfg.model();
    let mut phi = initial_condition(&mut sp, &p, cfg.seed)?;
    sp.comm_mut().barrier()?;
    sp.timers_mut().reset();
    let clock = Instant::now();
    let mut t = cfg.t0;
    for _ in 0..cfg.steps {
        phi = step_ifrk2(&mut sp, &phi, t, cfg.h, &p, &NoForcing)?;
        t += cfg.h;
    }
    sp.comm_mut().barrier()?;
    let wall = clock.elapsed().as_secs_f64();
    let timers = *sp.timers();
    let total = sp.comm_mut().all_reduce_sum(&[timers.elements(Phase::Transpose) as f64])?[0] as u64;
    Ok((wall, total, timers.calls(Phase::Transpose), layout.n_psi()))
}

/// Runs `cfg.steps` time steps at fixed `K` for each rank count in
/// `cfg.np_list`; speedups are relative to the smallest rank count.
pub fn cmd_speedup(cfg: &RunConfig) -> Result<Vec<SpeedupRow>, AppError> {
    let mut list = cfg.np_list.clone();
    list.sort_unstable();
    list.dedup();
    if list.is_empty() {
        return Err(AppError::Config("np_list is empty".into()));
    }
    let timeout = timeout_override()?;
    let mut rows: Vec<SpeedupRow> = Vec::new();
    for &np in &list {
        let mut out = spawn_inprocess(np, |mut comm| {
            if let Some(t) = timeout {
                comm.set_timeout(t);
            }
            speedup_rank(comm, cfg)
        })?;
        let (seconds, elements, transposes, n_psi) = out.swap_remove(0);
        let per = if transposes > 0 { elements / transposes } else { 0 };
        if transposes > 0 && (elements % transposes != 0 || per != expected_elements(n_psi, np)) {
            return Err(AppError::Other(format!(
                "N_p = {np}: {elements} elements over {transposes} transposes, expected {} each",
                expected_elements(n_psi, np)
            )));
        }
        let base = rows.first().map_or(seconds, |r| r.seconds);
        rows.push(SpeedupRow { n_ranks: np, n_psi, seconds, speedup: base / seconds, transposes, elements_per_transpose: per });
    }
    Ok(rows)
}
