//! Finite-volume simulation and diagnostics for degenerate advection-diffusion
//! equations of porous-medium type,
//!
//! ```text
//! u_t + div f(x,t,u) + div g(t,u) = mu(t) div(|u|^alpha grad u),
//! ```
//!
//! on truncated one- or two-dimensional boxes with no-flux boundaries.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the scenario
//! registry and the command-line driver use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod model;
pub mod scalar;
pub mod scenarios;
pub mod solver;

pub use diagnostics::{
    admissible, check_l1_decay, linf_estimate_ratio, AdmissiblePair, EstimateRatio, RunReport, RunSettings,
};
pub use error::{Error, Result};
pub use field::Field;
pub use grid::Grid;
pub use model::{AdvectionSpec, DiffusionSpec, ProblemSpec, TimeFunction, VelocityField};
pub use scalar::Scalar;
pub use scenarios::{InitialDatum, Scenario};
pub use solver::{Integrator, Scheme, SchemeConfig, SolverState};

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type RunReport64 = RunReport<f64>;
pub type Scenario64 = Scenario<f64>;
pub type Scheme64 = Scheme<f64>;

pub type Grid32 = Grid<f32>;
pub type Field32 = Field<f32>;
