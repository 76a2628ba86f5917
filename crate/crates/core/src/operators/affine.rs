use ndarray::Array2;

use super::{norm, GraphPair, MonotoneOperator, ResolventFailure, ResolventRequest};
use crate::error::{Error, Result};
use crate::space::Vector;

/// `T(x) = Qᵀ(Qx - b)`, the gradient of `½‖Qx - b‖²`.
///
/// Its resolvent solves `(ρQᵀQ + I)x = v + ρQᵀb` by conjugate gradients,
/// stopping at the first iterate whose true defect passes the relative-error
/// test.
#[derive(Debug, Clone)]
pub struct AffineBlockOperator {
    q: Array2<f64>,
    b: Vector,
    cap: CgCap,
}

/// Limit on conjugate-gradient steps per resolvent call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgCap {
    /// `factor · d` steps.
    PerDimension(usize),
    Steps(usize),
    Unlimited,
}

impl Default for CgCap {
    fn default() -> Self {
        CgCap::PerDimension(10)
    }
}

impl AffineBlockOperator {
    pub fn new(q: Array2<f64>, b: Vector) -> Result<Self> {
        if q.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                block: 0,
                expected: q.nrows(),
                found: b.len(),
            });
        }
        if q.ncols() == 0 {
            return Err(Error::Config("affine block needs at least one column".into()));
        }
        if !q.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("affine block data"));
        }
        Ok(Self {
            q,
            b,
            cap: CgCap::default(),
        })
    }

    pub fn with_cg_cap(mut self, cap: CgCap) -> Self {
        self.cap = cap;
        self
    }

    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    /// `Qᵀ(Qx - b)`.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.q.ncols() {
            return Err(Error::DimensionMismatch {
                block: 0,
                expected: self.q.ncols(),
                found: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    fn eval(&self, x: &Vector) -> Vector {
        let r = self.q.dot(x) - &self.b;
        self.q.t().dot(&r)
    }

    fn cap(&self) -> usize {
        match self.cap {
            CgCap::PerDimension(f) => f.saturating_mul(self.q.ncols()),
            CgCap::Steps(n) => n,
            CgCap::Unlimited => usize::MAX,
        }
    }
}

impl MonotoneOperator for AffineBlockOperator {
    fn dim(&self) -> usize {
        self.q.ncols()
    }

    fn inexact_resolvent(
        &self,
        req: &ResolventRequest,
        warm_start: Option<&Vector>,
    ) -> std::result::Result<GraphPair, ResolventFailure> {
        let rho = req.rho();
        let d = self.q.ncols();
        let system = |v: &Vector| -> Vector {
            let mut out = self.q.t().dot(&self.q.dot(v));
            out *= rho;
            out += v;
            out
        };

        let mut rhs = self.q.t().dot(&self.b);
        rhs *= rho;
        rhs += req.target();

        let mut x = match warm_start {
            Some(w) if w.len() == d => w.clone(),
            _ => Vector::zeros(d),
        };
        let mut r = &rhs - &system(&x);
        let mut p = r.clone();
        let mut rs = r.dot(&r);

        let mut best = ResolventFailure {
            steps: 0,
            defect: f64::INFINITY,
            allowed: 0.0,
        };
        let mut check = |x: &Vector, steps: usize| -> Option<GraphPair> {
            let y = self.eval(x);
            let e = req.defect(x, &y);
            let allowed = req.allowed_defect_sq(x, &y);
            let defect_sq = e.dot(&e);
            if defect_sq <= allowed {
                return Some(GraphPair {
                    x: x.clone(),
                    y,
                    e,
                    rho,
                    inner_iters: steps,
                });
            }
            if defect_sq.sqrt() < best.defect {
                best.defect = defect_sq.sqrt();
                best.allowed = allowed.sqrt();
            }
            best.steps = steps;
            None
        };

        // Nothing left for CG to do: the start point is the exact solution.
        if rs == 0.0 {
            return check(&x, 0).ok_or(best);
        }

        let cap = self.cap();
        let mut steps = 0;
        while steps < cap {
            let ap = system(&p);
            let pap = p.dot(&ap);
            if !(pap > 0.0) {
                break;
            }
            let step = rs / pap;
            x.scaled_add(step, &p);
            r.scaled_add(-step, &ap);
            steps += 1;

            if let Some(pair) = check(&x, steps) {
                return Ok(pair);
            }

            let rs_next = r.dot(&r);
            if rs_next == 0.0 {
                // restart from the true residual
                r = &rhs - &system(&x);
                let rs_true = r.dot(&r);
                if rs_true == 0.0 {
                    break;
                }
                p = r.clone();
                rs = rs_true;
                continue;
            }
            p *= rs_next / rs;
            p += &r;
            rs = rs_next;
        }
        best.steps = steps;
        if !best.defect.is_finite() {
            let y = self.eval(&x);
            best.defect = norm(&req.defect(&x, &y));
            best.allowed = req.allowed_defect_sq(&x, &y).sqrt();
        }
        Err(best)
    }
}
