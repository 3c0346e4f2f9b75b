//! A numerical laboratory for the one-dimensional barotropic compressible
//! Navier-Stokes equations with density-dependent viscosity `mu = alpha rho^delta`
//! (`0 < delta < 1`) and far-field vacuum.
//!
//! The equations are integrated in the reformulated unknowns
//! `h = rho^((delta-1)/2)`, `c = sqrt(A gamma) rho^((gamma-1)/2)` and `u`,
//! where the viscous term becomes an elliptic operator with the unbounded
//! coefficient `epsilon h^2`. On top of the solver the crate provides
//! discrete norms, the admissible initial-data families, conservation and
//! dissipation diagnostics, and a harness that measures the convergence of
//! viscous solutions to the inviscid (Euler) solution as `epsilon -> 0`.
//!
//! Module map:
//!
//! * [`model`]: parameters, transforms, symmetrizer and characteristic speeds
//! * [`grid`]: grid, finite differences, discrete Sobolev norms
//! * [`initdata`]: initial-data families and the initial functional `E0`
//! * [`solver`]: IMEX time stepping, Picard linearization, trajectories
//! * [`diagnostics`]: mass, momentum, energy, dissipation and bound checks
//! * [`limit_study`]: epsilon-, eta- and grid-refinement ladders
//! * [`mms`]: manufactured-solution convergence test
//! * [`scenario`]: the reference fluid, domain and data
//! * [`cli`]: configuration file and subcommands behind the `vflab` binary

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod initdata;
pub mod limit_study;
pub mod mms;
pub mod model;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Field, Grid1D, Norms};
pub use model::{FluidParams, RawParams};
pub use solver::{SolverConfig, State};
