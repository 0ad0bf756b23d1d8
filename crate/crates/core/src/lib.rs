//! Robust downlink beamforming for planar-array base stations under
//! l1-norm bounded channel uncertainty.
//!
//! The crate generates sparse angular-domain channels, lowers the robust
//! power-minimization problem into a second-order cone program, solves it
//! with an in-crate ADMM solver, and checks the result against exact
//! worst-case oracles.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod coneprog;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod numerics;
pub mod scheme;
pub mod solver;

pub use channel::{ChannelSet, SystemConfig, UncertaintyKind, UncertaintyModel};
pub use coneprog::{Beamformer, Cone, ConeProgram, ProblemSpec, VariableLayout};
pub use error::{Error, Result};
pub use experiment::{run_sweep, ExperimentConfig, SweepOutput};
pub use numerics::{CMat, CVec, RngStream, C64};
pub use scheme::{solve_scheme, Scheme, SchemeSolution};
pub use solver::{solve, SolveResult, SolveStatus, SolverSettings};
