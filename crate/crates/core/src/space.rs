//! The product space `H = H_0 x H_1 x ... x H_{n-1}` with the γ-weighted
//! inner product `<(z,w),(z',w')>_γ = γ<z,z'> + Σ_i <w_i,w'_i>`.
//!
//! Points are stored block by block so that the linear maps `G_i` can act on
//! their natural shapes.

use ndarray::Array1;

use crate::error::{check_domain, Error, Result};

/// Dense real vector used for every block.
pub type Vector = Array1<f64>;

/// The weight γ together with the block dimensions `(d_0, ..., d_{n-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaGeometry {
    gamma: f64,
    dims: Vec<usize>,
}

impl GammaGeometry {
    pub fn new(gamma: f64, dims: Vec<usize>) -> Result<Self> {
        check_domain("gamma", gamma, "(0, inf)", gamma > 0.0)?;
        if dims.is_empty() {
            return Err(Error::Config("geometry needs at least the z block".into()));
        }
        if let Some(block) = dims.iter().position(|&d| d == 0) {
            return Err(Error::DimensionMismatch {
                block,
                expected: 1,
                found: 0,
            });
        }
        Ok(Self { gamma, dims })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of blocks in a point, i.e. `1 + (n - 1)`.
    pub fn n_blocks(&self) -> usize {
        self.dims.len()
    }

    /// Checks that `p` has exactly this geometry's block structure.
    pub fn check(&self, p: &ProductPoint) -> Result<()> {
        if p.n_blocks() != self.dims.len() {
            return Err(Error::BlockCount {
                expected: self.dims.len(),
                found: p.n_blocks(),
            });
        }
        for (block, (v, &d)) in p.blocks().zip(&self.dims).enumerate() {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    block,
                    expected: d,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn zeros(&self) -> ProductPoint {
        ProductPoint {
            z: Vector::zeros(self.dims[0]),
            w: self.dims[1..].iter().map(|&d| Vector::zeros(d)).collect(),
        }
    }

    /// `γ<z,z'> + Σ_i <w_i,w'_i>`.
    pub fn inner(&self, p: &ProductPoint, q: &ProductPoint) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.inner_unchecked(p, q))
    }

    pub fn norm(&self, p: &ProductPoint) -> Result<f64> {
        Ok(self.norm_sq(p)?.sqrt())
    }

    pub fn norm_sq(&self, p: &ProductPoint) -> Result<f64> {
        self.check(p)?;
        Ok(self.inner_unchecked(p, p))
    }

    /// `‖p - q‖²_γ`.
    pub fn dist_sq(&self, p: &ProductPoint, q: &ProductPoint) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        let mut acc = self.gamma * sq_dist(&p.z, &q.z);
        for (a, b) in p.w.iter().zip(&q.w) {
            acc += sq_dist(a, b);
        }
        Ok(acc)
    }

    pub(crate) fn inner_unchecked(&self, p: &ProductPoint, q: &ProductPoint) -> f64 {
        self.gamma * p.z.dot(&q.z) + p.w.iter().zip(&q.w).map(|(a, b)| a.dot(b)).sum::<f64>()
    }
}

fn sq_dist(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A point `(z, w_1, ..., w_{n-1})` of the product space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    z: Vector,
    w: Vec<Vector>,
}

impl ProductPoint {
    /// Builds a point, rejecting non-finite entries.
    pub fn new(z: Vector, w: Vec<Vector>) -> Result<Self> {
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("z block"));
        }
        if !w.iter().all(|b| b.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("w block"));
        }
        Ok(Self { z, w })
    }

    pub(crate) fn from_parts(z: Vector, w: Vec<Vector>) -> Self {
        Self { z, w }
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn w(&self) -> &[Vector] {
        &self.w
    }

    pub fn into_parts(self) -> (Vector, Vec<Vector>) {
        (self.z, self.w)
    }

    pub fn n_blocks(&self) -> usize {
        1 + self.w.len()
    }

    /// Iterates `z, w_1, ..., w_{n-1}` in order.
    pub fn blocks(&self) -> impl Iterator<Item = &Vector> {
        std::iter::once(&self.z).chain(self.w.iter())
    }

    fn same_shape(&self, other: &ProductPoint) -> Result<()> {
        if self.n_blocks() != other.n_blocks() {
            return Err(Error::BlockCount {
                expected: self.n_blocks(),
                found: other.n_blocks(),
            });
        }
        for (block, (a, b)) in self.blocks().zip(other.blocks()).enumerate() {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    block,
                    expected: a.len(),
                    found: b.len(),
                });
            }
        }
        Ok(())
    }

    /// `a·p + q`, blockwise.
    pub fn axpy(a: f64, p: &ProductPoint, q: &ProductPoint) -> Result<ProductPoint> {
        p.same_shape(q)?;
        Ok(Self::axpy_unchecked(a, p, q))
    }

    pub(crate) fn axpy_unchecked(a: f64, p: &ProductPoint, q: &ProductPoint) -> ProductPoint {
        let z = &q.z + &(a * &p.z);
        let w = p.w.iter().zip(&q.w).map(|(pi, qi)| qi + &(a * pi)).collect();
        ProductPoint { z, w }
    }

    pub fn scaled(&self, a: f64) -> ProductPoint {
        ProductPoint {
            z: a * &self.z,
            w: self.w.iter().map(|b| a * b).collect(),
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &ProductPoint) -> Result<ProductPoint> {
        ProductPoint::axpy(-1.0, other, self)
    }

    pub fn max_abs_diff(&self, other: &ProductPoint) -> f64 {
        self.blocks()
            .zip(other.blocks())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}
