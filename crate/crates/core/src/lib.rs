//! Switching mirror-descent solvers for convex problems with functional
//! constraints.
//!
//! The toolkit covers relatively Lipschitz-continuous convex programming in
//! four settings:
//!
//! - **deterministic** single-constraint solvers driven by an inexact
//!   (δ,φ,V)-model of the objective and the constraint ([`solvers`]),
//! - **multi-constraint** variants that touch only one violated constraint
//!   per non-productive step,
//! - a **stochastic** solver fed by unbiased subgradient samples
//!   ([`stochastic`]),
//! - an **online** solver that serves a stream of per-round objectives with a
//!   certified accuracy κ ([`online`]).
//!
//! [`geometry`] supplies reference functions, Bregman divergences and the
//! proximal (mirror) step; [`model`] defines the model oracle interface;
//! [`problems`] ships the Fermat–Torricelli–Steiner benchmark family and an
//! independent reference-optimum oracle.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod online;
pub mod problems;
pub mod rng;
pub mod solvers;
pub mod stochastic;

pub use error::{Error, Result};
pub use geometry::{FeasibleSet, Geometry};
pub use model::{Functional, InexactModel, ModelTerm, SimpleTerm};
pub use solvers::{RunReport, SolverConfig, StepKind, StepLedger};
