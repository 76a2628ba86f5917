//! Relative-error inertial-relaxed inexact projective splitting for
//! structured monotone inclusions `0 ∈ Σ_i G_i* T_i(G_i z)`, with a LASSO
//! harness.
//!
//! The pieces, bottom up:
//! - [`space`]: the γ-weighted product space.
//! - [`params`]: admissible inertia and relaxation parameters.
//! - [`operators`]: inexact resolvents under the relative-error test.
//! - [`separator`]: the affine separator built from graph pairs.
//! - [`projector`]: the generic inertial-relaxed projection engine.
//! - [`solver`]: the splitting method itself.
//! - [`lasso`] and [`io`]: the application harness.

pub mod error;
pub mod io;
pub mod lasso;
pub mod operators;
pub mod params;
pub mod projector;
pub mod separator;
pub mod solver;
pub mod space;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use lasso::{LassoProblem, RandomSpec};
pub use operators::{GraphPair, LinearMap, MonotoneOperator, ResolventRequest};
pub use params::{beta_from_alpha, AlphaSchedule, BetaSchedule, InertiaRelaxationBudget};
pub use separator::SeparatorSample;
pub use solver::{
    solve, IterateRecord, IterateTrace, MonotoneBlock, SolveResult, Solver, SolverConfig, SplittingProblem, Status,
};
pub use space::{GammaGeometry, ProductPoint, Vector};
