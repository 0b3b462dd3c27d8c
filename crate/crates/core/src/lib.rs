//! Simulation and analytics for void cells in Poisson cellular networks.
//!
//! Base stations and users are independent homogeneous Poisson point
//! processes. Users attach to base stations by random cell association
//! (argmax of `W·H·d^{-α}`), which leaves some base stations without users.
//! The crate samples such networks on a torus, estimates void-cell and
//! coverage probabilities by Monte Carlo, and evaluates the closed-form
//! approximations and bounds they are compared against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod association;
pub mod channel;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod par;
pub mod point_process;
mod quadrature;
pub mod spatial_stats;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Point2, SimulationWindow};
pub use harness::{ExperimentConfig, ExperimentKind, RunOutput};
pub use point_process::PointPattern;
pub use stats::EstimateWithCI;
