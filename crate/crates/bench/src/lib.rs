//! Fixtures shared by the benchmarks in `benches/`.

use ndarray::{Array1, Array2};
use projsplit::lasso::random_instance;
use projsplit::operators::{AffineBlockOperator, ResolventRequest};
use projsplit::{LassoProblem, RandomSpec};

pub fn lasso(m: usize, d: usize, r: usize, seed: u64) -> LassoProblem {
    random_instance(RandomSpec { m, d, r, seed }).expect("valid shape").0
}

/// The first affine block of a random instance, with a resolvent request at
/// a nonzero point.
pub fn affine_block(m: usize, d: usize, sigma: f64) -> (AffineBlockOperator, ResolventRequest) {
    let p = lasso(m, d, 1, 3);
    let q: Array2<f64> = p.q().clone();
    let op = AffineBlockOperator::new(q, p.b().clone()).expect("block");
    let z = Array1::from_shape_fn(d, |j| (j as f64).sin());
    let w = Array1::from_shape_fn(d, |j| (j as f64).cos());
    let req = ResolventRequest::new(z, w, 1.0, sigma).expect("request");
    (op, req)
}
