//! Spectral Galerkin simulation of the damped, forced one-dimensional quantum
//! Zakharov system on `(0, L)` with Navier boundary conditions.
//!
//! Fields are stored as coefficients in the sine basis
//! `e_k(x) = sqrt(2/L) sin(k pi x / L)`, `k = 1..=N`, which diagonalises both
//! `-d^2/dx^2` and the fourth-order quantum correction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod initial;
pub mod integrators;
pub mod io;
pub mod model;
pub mod spectral;
pub mod trajectory;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use integrators::{integrate, step_reference_rk4, step_split, IntegrateOptions, Scheme, SplitStepper};
pub use model::{Derivative, Energies, ModelParams, State};
pub use spectral::{FieldC, FieldR, SineBasis, SpectralField};
pub use trajectory::{Accumulators, Record, TrajectoryLog};
