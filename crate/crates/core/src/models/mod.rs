//! Forward models and their time stepping.

pub mod banded;
pub mod fd;
pub mod kse;
pub mod nagumo;
pub mod stepping;

pub use fd::{fd_apply, FdStencils};
pub use kse::{kse_step, mu2, KseModel, KseParams};
pub use nagumo::{nagumo_exact, nagumo_run_adaptive, nagumo_step, NagumoModel, NagumoParams, NagumoRun};
pub use stepping::{AdaptiveOptions, StepControl, TimeStepping};

use crate::error::Result;
use crate::mesh::StateField;

/// A discretized PDE that can be advanced on whatever mesh its state lives on.
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;

    fn n_components(&self) -> usize;

    /// Spatial domain of the (possibly rescaled) problem.
    fn domain(&self) -> (f64, f64);

    /// One time step of size `dt` from time `t`.
    fn step(&self, u: &StateField, t: f64, dt: f64) -> Result<StateField>;

    fn time_stepping(&self) -> TimeStepping;

    /// Overwrites boundary values with the model's boundary data at time `t`.
    fn apply_boundary(&self, u: &mut StateField, t: f64);
}
