//! Pseudo-spectral simulation of the 2D Oldroyd-B system on a periodic
//! torus, with Littlewood–Paley diagnostics and scenario runners.

pub mod diagnostics;
pub mod error;
pub mod experiments;
mod fft;
pub mod initial_data;
pub mod integrator;
pub mod littlewood_paley;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use integrator::{advance_to, cfl_dt, semigroup_apply, step, Integrator, StepperConfig};
pub use littlewood_paley::{besov_norm, build_partition, BesovSpec, DyadicPartition, Summation};
pub use model::{FlowState, ModelParams, StressField};
pub use spectral::{Axis, Exponent, Grid, ScalarField, SpectralScalar, VectorField};
