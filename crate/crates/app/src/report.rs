//! Per-phase timing and traffic report.

use std::fmt::Write as _;
use std::path::Path;

use flame_core::timing::{Phase, PhaseTimers};

use crate::AppError;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    /// Rank 0's seconds per phase, in [`Phase::ALL`] order.
    pub seconds: [f64; 6],
    /// Complex elements received per phase, summed over ranks.
    pub elements: [u64; 6],
    pub wall: f64,
    pub n_ranks: usize,
    pub n_psi: usize,
    pub steps: u64,
}

impl TimingReport {
    pub fn new(timers: &PhaseTimers, elements: [u64; 6], wall: f64, n_ranks: usize, n_psi: usize, steps: u64) -> Self {
        let mut seconds = [0.0; 6];
        for (s, p) in seconds.iter_mut().zip(Phase::ALL) {
            *s = timers.seconds(p);
        }
        TimingReport { seconds, elements, wall, n_ranks, n_psi, steps }
    }

    pub fn phase_total(&self) -> f64 {
        self.seconds.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("phase,seconds,elements\n");
        for (i, p) in Phase::ALL.iter().enumerate() {
            let _ = writeln!(s, "{},{:.16e},{}", p.name(), self.seconds[i], self.elements[i]);
        }
        let _ = writeln!(s, "wall,{:.16e},{}", self.wall, self.elements.iter().sum::<u64>());
        s
    }

    /// Inverse of [`to_csv`](Self::to_csv) for the phase rows and wall time.
    pub fn parse_csv(text: &str) -> Result<([f64; 6], [u64; 6], f64), AppError> {
        let bad = |l: &str| AppError::Other(format!("malformed timing row {l:?}"));
        let (mut sec, mut el, mut wall) = ([0.0; 6], [0; 6], f64::NAN);
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad(line));
            }
            let s: f64 = f[1].parse().map_err(|_| bad(line))?;
            let e: u64 = f[2].parse().map_err(|_| bad(line))?;
            match Phase::ALL.iter().position(|p| p.name() == f[0]) {
                Some(i) => {
                    sec[i] = s;
                    el[i] = e;
                }
                None if f[0] == "wall" => wall = s,
                None => return Err(bad(line)),
            }
        }
        Ok((sec, el, wall))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "N_p = {}, K_psi = {}, steps = {}", self.n_ranks, self.n_psi, self.steps);
        let _ = writeln!(s, "wall time {:.3} s", self.wall);
        let _ = writeln!(s, "{:<12} {:>10} {:>7} {:>14}", "phase", "seconds", "share", "elements");
        for (i, p) in Phase::ALL.iter().enumerate() {
            let share = if self.wall > 0.0 { 100.0 * self.seconds[i] / self.wall } else { 0.0 };
            let _ = writeln!(s, "{:<12} {:>10.4} {:>6.1}% {:>14}", p.name(), self.seconds[i], share, self.elements[i]);
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), AppError> {
        let io = |p: &Path, e: std::io::Error| AppError::Other(format!("{}: {e}", p.display()));
        let csv = dir.join("timing.csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| io(&csv, e))?;
        let txt = dir.join("summary.txt");
        std::fs::write(&txt, self.summary()).map_err(|e| io(&txt, e))
    }
}
