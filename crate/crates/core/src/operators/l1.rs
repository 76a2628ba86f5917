use super::{GraphPair, MonotoneOperator, ResolventFailure, ResolventRequest};
use crate::error::{check_domain, Result};
use crate::space::Vector;

/// `T = ∂(λ‖·‖₁)`; its resolvent is componentwise soft-thresholding and is
/// evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Operator {
    lambda: f64,
    dim: usize,
}

impl L1Operator {
    pub fn new(lambda: f64, dim: usize) -> Result<Self> {
        check_domain("lambda", lambda, "[0, inf)", lambda >= 0.0)?;
        Ok(Self { lambda, dim })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `sign(v)·max(|v| - t, 0)` componentwise.
pub fn soft_threshold(v: &Vector, t: f64) -> Vector {
    v.mapv(|x| {
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            0.0
        }
    })
}

impl MonotoneOperator for L1Operator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn inexact_resolvent(
        &self,
        req: &ResolventRequest,
        _warm_start: Option<&Vector>,
    ) -> std::result::Result<GraphPair, ResolventFailure> {
        let rho = req.rho();
        let v = req.target();
        let x = soft_threshold(v, rho * self.lambda);
        let y = (v - &x) / rho;
        Ok(GraphPair {
            e: Vector::zeros(x.len()),
            x,
            y,
            rho,
            inner_iters: 0,
        })
    }
}
