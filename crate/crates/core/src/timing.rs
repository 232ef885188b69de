//! Wall-clock and traffic accounting per block of the time step.

use std::time::{Duration, Instant};

/// Blocks of one time step; communication-heavy blocks are `Transpose` and
/// `Symmetrize`, arithmetic-heavy ones `Fft`, `Pointwise` and `Integrate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Fft,
    Transpose,
    Symmetrize,
    Pointwise,
    Integrate,
    Diagnostics,
}

impl Phase {
    pub const ALL: [Phase; 6] =
        [Phase::Fft, Phase::Transpose, Phase::Symmetrize, Phase::Pointwise, Phase::Integrate, Phase::Diagnostics];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Fft => "fft",
            Phase::Transpose => "transpose",
            Phase::Symmetrize => "symmetrize",
            Phase::Pointwise => "pointwise",
            Phase::Integrate => "integrate",
            Phase::Diagnostics => "diagnostics",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Accumulated seconds and exchanged complex elements per [`Phase`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimers {
    seconds: [f64; 6],
    elements: [u64; 6],
    calls: [u64; 6],
}

impl PhaseTimers {
    pub fn add(&mut self, phase: Phase, elapsed: Duration, elements: u64) {
        let s = phase.slot();
        self.seconds[s] += elapsed.as_secs_f64();
        self.elements[s] += elements;
        self.calls[s] += 1;
    }

    pub fn start(&self) -> Instant {
        Instant::now()
    }

    pub fn seconds(&self, phase: Phase) -> f64 {
        self.seconds[phase.slot()]
    }

    /// Complex elements this rank received from other ranks in `phase`.
    pub fn elements(&self, phase: Phase) -> u64 {
        self.elements[phase.slot()]
    }

    pub fn calls(&self, phase: Phase) -> u64 {
        self.calls[phase.slot()]
    }

    pub fn total_seconds(&self) -> f64 {
        self.seconds.iter().sum()
    }

    pub fn reset(&mut self) {
        *self = PhaseTimers::default();
    }
}
