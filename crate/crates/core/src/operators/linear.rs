use std::fmt;

use ndarray::Array2;

use crate::space::Vector;

/// A bounded linear map `G : H_0 -> H_i` together with its adjoint.
pub trait LinearMap: Send + Sync + fmt::Debug {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, v: &Vector) -> Vector;
    fn adjoint(&self, u: &Vector) -> Vector;
    /// An upper bound on the operator norm.
    fn norm_bound(&self) -> f64;
    fn is_identity(&self) -> bool {
        false
    }
}

pub type LinearMapHandle = Box<dyn LinearMap>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity {
    dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LinearMap for Identity {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, v: &Vector) -> Vector {
        v.clone()
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        u.clone()
    }
    fn norm_bound(&self) -> f64 {
        1.0
    }
    fn is_identity(&self) -> bool {
        true
    }
}

/// Dense matrix map; the norm bound is the Frobenius norm.
#[derive(Debug, Clone)]
pub struct DenseMap {
    matrix: Array2<f64>,
    frobenius: f64,
}

impl DenseMap {
    pub fn new(matrix: Array2<f64>) -> Self {
        let frobenius = matrix.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { matrix, frobenius }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

impl LinearMap for DenseMap {
    fn in_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn out_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, v: &Vector) -> Vector {
        self.matrix.dot(v)
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        self.matrix.t().dot(u)
    }
    fn norm_bound(&self) -> f64 {
        self.frobenius
    }
}
