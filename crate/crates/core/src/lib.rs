//! Solver and decay analysis for a strongly damped p-Laplacian wave
//! equation posed on an expanding interval (0, L(t)).
//!
//! The crate is organized along the analysis pipeline:
//!
//! - [`domain`] and [`weight`] describe the moving geometry L(t) and the
//!   time weights phi(t) used by the decay machinery;
//! - [`banded`] and [`solver`] integrate the pulled-back system on the
//!   fixed reference interval;
//! - [`energy`] evaluates energy, dissipation, and the discrete energy
//!   identity along a run;
//! - [`inequalities`], [`constraints`], [`komornik`], and [`envelope`]
//!   check the hypotheses behind the decay estimates and fit certified
//!   decay envelopes to measured traces.

pub mod banded;
pub mod constraints;
pub mod domain;
pub mod energy;
pub mod envelope;
pub mod inequalities;
pub mod komornik;
pub mod solver;
pub mod weight;

pub use domain::DomainTrajectory;
pub use energy::EnergyTrace;
pub use solver::{ReferenceState, SolverConfig};
pub use weight::WeightFunction;
