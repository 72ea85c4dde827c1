//! Derivative-free optimization over convex sets with feasible-point models.
//!
//! The crate builds linear regression and minimum-Frobenius-norm quadratic
//! models from samples that all lie in the feasible region, checks and
//! repairs their geometry through Lagrange polynomials, and drives a
//! trust-region method on top of them.

pub mod basis;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod linear_models;
pub mod poisedness;
pub mod problems;
pub mod quadratic_models;
pub mod set;
pub mod solver;
pub mod subproblems;

pub use error::{Error, Result};
pub use geometry::{parse_region, ConvexRegion, Halfspace, ProjectionResult, RegionKind};
pub use basis::{Basis, ModelKind};
pub use linear_models::{LinearModel, RegressionBasis, RegressionFit};
pub use quadratic_models::{MfnSystem, QuadraticModel};
pub use set::InterpolationSet;
pub use solver::{solve, RunRecord, SolveOutcome, SolverConfig, StepKind};
