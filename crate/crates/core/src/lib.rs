//! Desk-scale laboratory for finite-entropy weak solutions of 1-D scalar
//! conservation laws `u_t + f(u)_x = 0` with uniformly convex flux.
//!
//! * [`flux_model`]: fluxes, entropy pairs, shock algebra and the bounce map.
//! * [`front_tracking`]: exact event-driven piecewise-constant solutions.
//! * [`lagrangian`]: weighted curve ensembles representing the hypograph and
//!   epigraph of a solution.
//! * [`flux_formula`]: entropy flux across a curve, Eulerian and Lagrangian.
//! * [`characteristics`]: barrier construction of generalized characteristics.
//! * [`scenario`] and [`report`]: configuration, orchestration and output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod error;
pub mod flux_formula;
pub mod flux_model;
pub mod front_tracking;
pub mod lagrangian;
pub mod par;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod testfn;

pub use error::{Error, Result};
pub use flux_model::{Anchor, EntropyKind, EntropyPair, Flux, FluxSpec, ShockData};
pub use front_tracking::{FrontSolution, InitialData, InteractionMode, JumpMode};
pub use lagrangian::{Ensemble, GridSpec, LagCurve, Side};
pub use par::Exec;
