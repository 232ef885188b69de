//! Distributed pseudo-spectral simulation of expanding flame fronts.
//!
//! Fourier coefficients of the front perturbation are split by columns
//! across ranks; the quadratic term is evaluated on a zero-padded grid
//! through a distributed 2D transform whose global transpose is the only
//! all-to-all exchange per transform.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the CLI uses.

pub mod comm;
pub mod diagnostics;
pub mod dist_field;
pub mod error;
pub mod fft;
pub mod integrator;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod timing;

pub use error::{Error, Result};
pub use scalar::{Cplx, Scalar};

pub type Field = dist_field::SpectralField<f64>;
pub type Band64 = dist_field::Band<f64>;
pub type Spectral64 = fft::Spectral<f64>;
pub type Params = model::ModelParams<f64>;
pub type Series = diagnostics::VelocitySeries<f64>;
pub type Fit = diagnostics::PowerLawFit<f64>;
pub type Config = integrator::IntegratorConfig<f64>;

pub type Field32 = dist_field::SpectralField<f32>;
pub type Spectral32 = fft::Spectral<f32>;
