//! `flame run` and `flame fit`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use flame_core::comm::{connect_tcp, spawn_inprocess, Communicator, TcpOptions};
use flame_core::diagnostics::{export_path, export_physical, export_series, fit_power_law, mean_height, mean_velocity, read_series};
use flame_core::dist_field::{load_checkpoint, save_checkpoint, Layout, SpectralField};
use flame_core::integrator::{run, Observer};
use flame_core::model::{initial_condition, NoForcing};
use flame_core::timing::Phase;
use flame_core::{Error, Fit, Series, Spectral64};

use crate::report::TimingReport;
use crate::{timeout_override, AppError, Backend, RunConfig};

/// What rank 0 reports after a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: u64,
    pub last_step: u64,
    pub t: f64,
    pub heights: Series,
    pub report: TimingReport,
    pub output_dir: PathBuf,
}

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("checkpoint_{step}.flck"))
}

struct RunObserver {
    dir: PathBuf,
    heights: Series,
}

impl Observer<f64> for RunObserver {
    fn output(&mut self, sp: &mut Spectral64, _step: u64, t: f64, phi: &SpectralField<f64>) -> flame_core::Result<()> {
        let m = mean_height(sp, phi)?;
        self.heights.push(t, m)
    }

    fn checkpoint(&mut self, sp: &mut Spectral64, step: u64, t: f64, phi: &SpectralField<f64>) -> flame_core::Result<()> {
        let path = checkpoint_path(&self.dir, step);
        let clock = Instant::now();
        save_checkpoint(sp.comm_mut(), phi, t, &path)?;
        sp.timers_mut().add(Phase::Diagnostics, clock.elapsed(), 0);
        Ok(())
    }
}

fn create_dir(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::Config(format!("cannot create {}: {e}", dir.display())))
}

/// One rank's share of `flame run`. Collective; returns `Some` on rank 0.
pub fn run_rank(comm: Communicator, cfg: &RunConfig) -> Result<Option<RunSummary>, Error> {
    let layout = Layout::build(cfg.k, comm.size())?;
    let mut sp = Spectral64::new(comm, layout, cfg.transpose_strategy)?;
    let p = cfg.model();
    let (phi, t0, first_step) = match &cfg.resume {
        Some(path) => {
            let (phi, t) = load_checkpoint::<f64>(sp.comm_mut(), layout, path)?;
            let step = ((t - cfg.t0) / cfg.h).round().max(0.0) as u64;
            (phi, t, step)
        }
        None => (initial_condition(&mut sp, &p, cfg.seed)?, cfg.t0, 0),
    };
    let mut obs = RunObserver { dir: cfg.output_dir.clone(), heights: Series::empty() };
    let integ = cfg.integrator();
    let wall = Instant::now();
    let out = run(&mut sp, phi, t0, first_step, &integ, &p, &NoForcing, &mut obs)?;
    let wall = wall.elapsed().as_secs_f64();
    let steps = out.step - first_step;

    let dir = &cfg.output_dir;
    if cfg.export_physical {
        export_physical(&mut sp, &out.phi, out.t, &p, &export_path(dir, "radius", out.step))?;
    }
    let timers = *sp.timers();
    let elems: Vec<f64> = Phase::ALL.iter().map(|&ph| timers.elements(ph) as f64).collect();
    let totals = sp.comm_mut().all_reduce_sum(&elems)?;
    if sp.rank() != 0 {
        return Ok(None);
    }
    let mut elements = [0u64; 6];
    for (e, t) in elements.iter_mut().zip(&totals) {
        *e = *t as u64;
    }
    let report = TimingReport::new(&timers, elements, wall, layout.n_ranks(), layout.n_psi(), steps);
    export_series(&obs.heights, &export_path(dir, "height", out.step))?;
    if obs.heights.len() >= 2 {
        let v = mean_velocity(&obs.heights, &p.radius)?;
        export_series(&v, &export_path(dir, "velocity", out.step))?;
    }
    Ok(Some(RunSummary { steps, last_step: out.step, t: out.t, heights: obs.heights, report, output_dir: dir.clone() }))
}

/// `flame run`: in-process ranks, or this process's rank of a TCP mesh.
/// Only rank 0 returns a summary.
pub fn cmd_run(cfg: &RunConfig) -> Result<Option<RunSummary>, AppError> {
    create_dir(&cfg.output_dir)?;
    let timeout = timeout_override()?;
    let summary = match cfg.backend {
        Backend::InProcess => {
            let mut out = spawn_inprocess(cfg.n_ranks, |mut comm| {
                if let Some(t) = timeout {
                    comm.set_timeout(t);
                }
                run_rank(comm, cfg)
            })?;
            out.swap_remove(0)
        }
        Backend::Tcp => {
            let rank = cfg.rank.ok_or_else(|| AppError::Config("tcp backend needs --rank".into()))?;
            let mut opts = TcpOptions::default();
            if let Some(t) = timeout {
                opts.timeout = t;
                opts.connect_timeout = t;
            }
            let comm = connect_tcp(rank, &cfg.peers, &opts).map_err(|e| AppError::Comm(e.to_string()))?;
            run_rank(comm, cfg)?
        }
    };
    if let Some(s) = &summary {
        s.report.write(&s.output_dir)?;
    }
    Ok(summary)
}

/// `flame fit`: power-law fit of a velocity series file.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Fit, AppError> {
    let path = cfg.input.as_ref().ok_or_else(|| AppError::Config("fit needs input = <series csv>".into()))?;
    let series: Series = read_series(path)?;
    Ok(fit_power_law(&series)?)
}
