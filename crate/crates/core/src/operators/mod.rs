//! Maximal monotone operators evaluated through inexact resolvents.
//!
//! A resolvent call receives `v = Gẑ + ρŵ` and must return a graph pair
//! `y ∈ T(x)` with defect `e = x + ρy - v` satisfying the relative-error test
//!
//! ```text
//! ‖e‖² <= σ² (‖Gẑ - x‖² + ‖ρ(ŵ - y)‖²)
//! ```

mod affine;
mod l1;
mod linear;

use std::fmt;

pub use affine::{AffineBlockOperator, CgCap};
pub use l1::{soft_threshold, L1Operator};
pub use linear::{DenseMap, Identity, LinearMap, LinearMapHandle};

use crate::error::{check_domain, Error, Result};
use crate::space::Vector;

/// Magnitude-relative floor on the resolvent defect. It admits the rounding
/// error of evaluating `x + ρy - v` in double precision, which is what makes
/// `σ = 0` (exact resolvents) attainable.
pub const DEFECT_FLOOR: f64 = 1e-12;

/// One inexact-resolvent subproblem.
#[derive(Debug, Clone)]
pub struct ResolventRequest {
    target: Vector,
    z_hat_mapped: Vector,
    w_hat: Vector,
    rho: f64,
    sigma: f64,
}

impl ResolventRequest {
    pub fn new(z_hat_mapped: Vector, w_hat: Vector, rho: f64, sigma: f64) -> Result<Self> {
        check_domain("rho", rho, "(0, inf)", rho > 0.0)?;
        check_domain("sigma", sigma, "[0, 1)", (0.0..1.0).contains(&sigma))?;
        if z_hat_mapped.len() != w_hat.len() {
            return Err(Error::DimensionMismatch {
                block: 0,
                expected: z_hat_mapped.len(),
                found: w_hat.len(),
            });
        }
        let target = &z_hat_mapped + &(rho * &w_hat);
        Ok(Self {
            target,
            z_hat_mapped,
            w_hat,
            rho,
            sigma,
        })
    }

    /// `Gẑ + ρŵ`.
    pub fn target(&self) -> &Vector {
        &self.target
    }
    pub fn z_hat_mapped(&self) -> &Vector {
        &self.z_hat_mapped
    }
    pub fn w_hat(&self) -> &Vector {
        &self.w_hat
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// `x + ρy - (Gẑ + ρŵ)`.
    pub fn defect(&self, x: &Vector, y: &Vector) -> Vector {
        let mut e = x - &self.target;
        e.scaled_add(self.rho, y);
        e
    }

    /// Right-hand side of the relative-error test at `(x, y)`, floor included.
    pub fn allowed_defect_sq(&self, x: &Vector, y: &Vector) -> f64 {
        let primal = sq_dist(&self.z_hat_mapped, x);
        let dual = self.rho * self.rho * sq_dist(&self.w_hat, y);
        let floor = DEFECT_FLOOR * (1.0 + norm(&self.target) + norm(x) + self.rho * norm(y));
        self.sigma * self.sigma * (primal + dual) + floor * floor
    }

    /// Evaluates the relative-error test for a candidate pair with its defect.
    pub fn accepts(&self, x: &Vector, y: &Vector, e: &Vector) -> bool {
        e.dot(e) <= self.allowed_defect_sq(x, y)
    }
}

pub(crate) fn norm(v: &Vector) -> f64 {
    v.dot(v).sqrt()
}

pub(crate) fn sq_dist(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A point `(x, y)` on the graph of `T_i`, with the resolvent defect `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPair {
    pub x: Vector,
    pub y: Vector,
    pub e: Vector,
    pub rho: f64,
    /// Inner solver iterations spent producing the pair.
    pub inner_iters: usize,
}

impl GraphPair {
    /// Independently re-checks the relative-error test against the request.
    pub fn satisfies(&self, req: &ResolventRequest) -> bool {
        let e = req.defect(&self.x, &self.y);
        (&e - &self.e).iter().all(|d| d.abs() <= DEFECT_FLOOR * (1.0 + norm(req.target())))
            && req.accepts(&self.x, &self.y, &e)
    }
}

/// Returned when an inner solver cannot meet the relative-error test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventFailure {
    pub steps: usize,
    /// Smallest defect norm seen.
    pub defect: f64,
    /// Allowed defect norm at that point.
    pub allowed: f64,
}

/// A maximal monotone operator `T_i` on `H_i`.
pub trait MonotoneOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Produces `y ∈ T(x)` with `x + ρy = v + e` and `e` within the
    /// relative-error bound. `warm_start` seeds iterative inner solvers.
    fn inexact_resolvent(
        &self,
        req: &ResolventRequest,
        warm_start: Option<&Vector>,
    ) -> std::result::Result<GraphPair, ResolventFailure>;
}
