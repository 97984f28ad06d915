//! Splitting-step integrators for stochastic differential equations whose
//! noise term vanishes on a boundary.
//!
//! Each time step first samples the solvable stochastic part exactly (through
//! non-central χ² laws, geometric Brownian motion, or a conjugating transform)
//! and then integrates the remaining drift with a deterministic ODE stepper.
//! Nonnegativity and the Feller class of the boundary survive discretisation.
//!
//! Modules:
//! - [`rng`]: seed/stream-addressed random variates, including non-central χ²
//!   with zero and negative even degrees of freedom.
//! - [`transitions`]: exact one-step samplers.
//! - [`integrator`]: split and baseline schemes, path simulation.
//! - [`models`]: the model catalog with known statistics.
//! - [`spde`]: lattice super-random walk and contact-process SPDEs.
//! - [`harness`]: weak/strong error studies and order fits.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod integrator;
pub mod models;
pub mod rng;
pub mod spde;
pub mod stats;
pub mod transitions;

pub use error::{Error, Result};
pub use rng::{stream_id, NcChi2Params, RngStream};
pub use transitions::{BoundaryClass, TransitionSampler};
