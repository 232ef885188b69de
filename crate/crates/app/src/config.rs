//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.
//! Command-line flags are applied after the file through the same setter.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flame_core::dist_field::TransposeStrategy;
use flame_core::integrator::IntegratorConfig;
use flame_core::model::ModelParams;
use flame_core::Params;

use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    InProcess,
    Tcp,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inprocess" => Ok(Backend::InProcess),
            "tcp" => Ok(Backend::Tcp),
            _ => Err(format!("unknown backend {s:?} (expected inprocess or tcp)")),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::InProcess => "inprocess",
            Backend::Tcp => "tcp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub n_ranks: usize,
    pub backend: Backend,
    pub peers: Vec<String>,
    /// This process's rank (tcp backend only).
    pub rank: Option<usize>,
    pub gamma: f64,
    pub theta_pi: u32,
    pub phi_pi: u32,
    pub epsilon: f64,
    pub t0: f64,
    pub h: f64,
    pub t_end: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub output_every: u64,
    pub checkpoint_every: u64,
    pub symmetrize_every: u64,
    pub transpose_strategy: TransposeStrategy,
    /// Checkpoint to continue from.
    pub resume: Option<PathBuf>,
    /// Write the final front shape as CSV.
    pub export_physical: bool,
    /// `K` values for `bench-transpose`.
    pub sizes: Vec<usize>,
    /// Rank counts for `speedup`.
    pub np_list: Vec<usize>,
    /// Time steps per `speedup` measurement.
    pub steps: u64,
    /// Series file for `fit`.
    pub input: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 0,
            n_ranks: 1,
            backend: Backend::InProcess,
            peers: Vec::new(),
            rank: None,
            gamma: 0.8,
            theta_pi: 1,
            phi_pi: 1,
            epsilon: 1e-3,
            t0: 200.0,
            h: 0.01,
            t_end: f64::NAN,
            seed: 0,
            output_dir: PathBuf::from("flame-out"),
            output_every: 1,
            checkpoint_every: 0,
            symmetrize_every: 1,
            transpose_strategy: TransposeStrategy::AllToAll,
            resume: None,
            export_physical: false,
            sizes: Vec::new(),
            np_list: vec![1, 2, 4],
            steps: 5,
            input: None,
        }
    }
}

/// Every accepted key, in the order flags are applied.
pub const KEYS: &[&str] = &[
    "K",
    "N_p",
    "backend",
    "peers",
    "rank",
    "gamma",
    "theta_pi",
    "phi_pi",
    "epsilon",
    "t0",
    "h",
    "t_end",
    "seed",
    "output_dir",
    "output_every",
    "checkpoint_every",
    "symmetrize_every",
    "transpose_strategy",
    "resume",
    "export_physical",
    "sizes",
    "np_list",
    "steps",
    "input",
];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, AppError>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e| AppError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>, AppError>
where
    V::Err: fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), AppError> {
        let v = value.trim();
        match key {
            "K" | "k" => self.k = parse(key, v)?,
            "N_p" | "n_p" | "np" => self.n_ranks = parse(key, v)?,
            "backend" => self.backend = v.parse().map_err(AppError::Config)?,
            "peers" => self.peers = parse_list(key, v)?,
            "rank" => self.rank = Some(parse(key, v)?),
            "gamma" => self.gamma = parse(key, v)?,
            "theta_pi" => self.theta_pi = parse(key, v)?,
            "phi_pi" => self.phi_pi = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "t0" => self.t0 = parse(key, v)?,
            "h" => self.h = parse(key, v)?,
            "t_end" => self.t_end = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "output_every" => self.output_every = parse(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "symmetrize_every" => self.symmetrize_every = parse(key, v)?,
            "transpose_strategy" => self.transpose_strategy = v.parse().map_err(AppError::Config)?,
            "resume" => self.resume = Some(PathBuf::from(v)),
            "export_physical" => self.export_physical = parse(key, v)?,
            "sizes" => self.sizes = parse_list(key, v)?,
            "np_list" => self.np_list = parse_list(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "input" => self.input = Some(PathBuf::from(v)),
            _ => return Err(AppError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses file contents; `K` must be present.
    pub fn from_str_checked(text: &str, origin: &str) -> Result<Self, AppError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text, origin)?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), AppError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| AppError::Config(format!("{origin}:{}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    /// Reads an optional file, then applies `overrides` in order, then
    /// validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, AppError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: String| Err(AppError::Config(m));
        if self.k == 0 {
            return bad("K is required and must be at least 1".into());
        }
        if self.n_ranks == 0 {
            return bad("N_p must be at least 1".into());
        }
        self.model().validate().map_err(|e| AppError::Config(e.to_string()))?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h = {} must be positive", self.h));
        }
        if self.t_end.is_finite() && self.t_end < self.t0 {
            return bad(format!("t_end = {} precedes t0 = {}", self.t_end, self.t0));
        }
        if self.output_every == 0 || self.symmetrize_every == 0 {
            return bad("output_every and symmetrize_every must be at least 1".into());
        }
        if self.np_list.contains(&0) {
            return bad("np_list entries must be at least 1".into());
        }
        if self.backend == Backend::Tcp {
            if self.peers.len() != self.n_ranks {
                return bad(format!("tcp backend needs {} peers, got {}", self.n_ranks, self.peers.len()));
            }
            match self.rank {
                Some(r) if r < self.n_ranks => {}
                _ => return bad("tcp backend needs rank in 0..N_p".into()),
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Params {
        ModelParams { gamma: self.gamma, theta_pi: self.theta_pi, phi_pi: self.phi_pi, epsilon: self.epsilon, t0: self.t0, ..ModelParams::flame(self.k) }
    }

    /// `t_end` defaults to ten steps past `t0`.
    pub fn t_end(&self) -> f64 {
        if self.t_end.is_finite() {
            self.t_end
        } else {
            self.t0 + 10.0 * self.h
        }
    }

    pub fn integrator(&self) -> IntegratorConfig<f64> {
        IntegratorConfig {
            h: self.h,
            t_end: self.t_end(),
            output_every: self.output_every,
            symmetrize_every: self.symmetrize_every,
            checkpoint_every: self.checkpoint_every,
        }
    }
}
