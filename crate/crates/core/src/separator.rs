//! The affine separator built from one round of resolvent evaluations.
//!
//! With graph pairs `y_i ∈ T_i(x_i)`, `i = 1..n`, and `G_n = I`,
//!
//! ```text
//! φ(z, w) = Σ_{i<n} <G_i z - x_i, y_i - w_i> + <z - x_n, y_n + Σ_{i<n} G_i* w_i>
//! ```
//!
//! is affine, nonpositive on the extended solution set, and has γ-gradient
//! `(γ⁻¹ s, x_1 - G_1 x_n, ..., x_{n-1} - G_{n-1} x_n)` with
//! `s = Σ_{i<n} G_i* y_i + y_n`.

use crate::error::{Error, Result};
use crate::operators::{norm, sq_dist, GraphPair, LinearMapHandle, ResolventRequest};
use crate::space::{GammaGeometry, ProductPoint, Vector};

/// Relative rounding allowance on `φ(p̂)` below zero.
pub const PHI_ROUNDING: f64 = 1e-14;

/// Default `ε_grad` of the gradient test `‖∇φ‖²_γ <= ε_grad (1 + ‖p̂‖²_γ)`.
pub const GRAD_EPS: f64 = 1e-20;

#[derive(Debug, Clone)]
pub struct SeparatorSample {
    pairs: Vec<GraphPair>,
    s: Vector,
    grad: ProductPoint,
    grad_norm_sq_gamma: f64,
    phi_at_hat: f64,
    gamma: f64,
}

fn check_maps(pairs: &[GraphPair], maps: &[LinearMapHandle], geom: &GammaGeometry) -> Result<()> {
    if pairs.len() != maps.len() + 1 || geom.n_blocks() != pairs.len() {
        return Err(Error::BlockCount {
            expected: geom.n_blocks(),
            found: pairs.len(),
        });
    }
    let d0 = geom.dims()[0];
    for (i, (pair, g)) in pairs.iter().zip(maps).enumerate() {
        let di = geom.dims()[i + 1];
        if g.in_dim() != d0 || g.out_dim() != di || pair.x.len() != di || pair.y.len() != di {
            return Err(Error::DimensionMismatch {
                block: i + 1,
                expected: di,
                found: pair.x.len(),
            });
        }
    }
    let last = &pairs[pairs.len() - 1];
    if last.x.len() != d0 || last.y.len() != d0 {
        return Err(Error::DimensionMismatch {
            block: pairs.len(),
            expected: d0,
            found: last.x.len(),
        });
    }
    Ok(())
}

impl SeparatorSample {
    /// Assembles gradient, its γ-norm and `φ(p̂)` from the `n` pairs.
    /// `maps` holds `G_1, ..., G_{n-1}`; `G_n` is the identity.
    pub fn assemble(
        pairs: Vec<GraphPair>,
        p_hat: &ProductPoint,
        maps: &[LinearMapHandle],
        geom: &GammaGeometry,
    ) -> Result<Self> {
        check_maps(&pairs, maps, geom)?;
        geom.check(p_hat)?;
        let n = pairs.len();
        let x_n = &pairs[n - 1].x;

        let mut s = pairs[n - 1].y.clone();
        let mut grad_w = Vec::with_capacity(n - 1);
        for (pair, g) in pairs.iter().zip(maps) {
            s += &g.adjoint(&pair.y);
            grad_w.push(&pair.x - &g.apply(x_n));
        }
        let gamma = geom.gamma();
        let grad_norm_sq_gamma = s.dot(&s) / gamma + grad_w.iter().map(|v| v.dot(v)).sum::<f64>();
        let grad = ProductPoint::from_parts(&s / gamma, grad_w);

        let mut sample = Self {
            pairs,
            s,
            grad,
            grad_norm_sq_gamma,
            phi_at_hat: 0.0,
            gamma,
        };
        sample.phi_at_hat = sample.phi_unchecked(p_hat, maps);
        Ok(sample)
    }

    fn phi_unchecked(&self, p: &ProductPoint, maps: &[LinearMapHandle]) -> f64 {
        let n = self.pairs.len();
        let last = &self.pairs[n - 1];
        let mut dual_n = last.y.clone();
        let mut acc = 0.0;
        for ((pair, g), w) in self.pairs.iter().zip(maps).zip(p.w()) {
            let primal = g.apply(p.z()) - &pair.x;
            acc += primal.dot(&(&pair.y - w));
            dual_n += &g.adjoint(w);
        }
        acc + (p.z() - &last.x).dot(&dual_n)
    }

    /// `φ(p)` for an arbitrary point.
    pub fn phi(&self, p: &ProductPoint, maps: &[LinearMapHandle], geom: &GammaGeometry) -> Result<f64> {
        geom.check(p)?;
        if maps.len() + 1 != self.pairs.len() {
            return Err(Error::BlockCount {
                expected: self.pairs.len() - 1,
                found: maps.len(),
            });
        }
        Ok(self.phi_unchecked(p, maps))
    }

    pub fn pairs(&self) -> &[GraphPair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<GraphPair> {
        self.pairs
    }

    /// `Σ_{i<n} G_i* y_i + y_n`, so that the z-block of the gradient is `s / γ`.
    pub fn s(&self) -> &Vector {
        &self.s
    }

    pub fn grad(&self) -> &ProductPoint {
        &self.grad
    }

    pub fn grad_norm_sq_gamma(&self) -> f64 {
        self.grad_norm_sq_gamma
    }

    /// Raw `φ(p̂)` as evaluated, before any clamping.
    pub fn phi_at_hat(&self) -> f64 {
        self.phi_at_hat
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// How far below zero `φ(p̂)` may fall without breaking the contract: the
    /// defect floor admitted by the requests plus rounding in the inner
    /// products.
    pub fn negativity_floor(&self, requests: &[ResolventRequest]) -> f64 {
        let mut floor = 0.0;
        let mut scale = 0.0;
        for (pair, req) in self.pairs.iter().zip(requests) {
            let primal = sq_dist(req.z_hat_mapped(), &pair.x);
            let dual = req.rho() * req.rho() * sq_dist(req.w_hat(), &pair.y);
            let excess = pair.e.dot(&pair.e) - req.sigma() * req.sigma() * (primal + dual);
            floor += excess.max(0.0) / (2.0 * req.rho());
            scale += (norm(req.z_hat_mapped()) + norm(&pair.x)) * (norm(req.w_hat()) + norm(&pair.y));
        }
        floor + PHI_ROUNDING * scale
    }

    /// `φ(p̂)` clamped at zero when it is negative within the floor. A more
    /// negative value means some pair broke the relative-error contract.
    pub fn certified_phi(&self, k: usize, requests: &[ResolventRequest]) -> Result<f64> {
        if self.phi_at_hat >= 0.0 {
            return Ok(self.phi_at_hat);
        }
        let floor = self.negativity_floor(requests);
        if self.phi_at_hat >= -floor {
            Ok(0.0)
        } else {
            Err(Error::SeparatorContract {
                k,
                phi: self.phi_at_hat,
                floor: -floor,
            })
        }
    }

    /// `max{0, φ(p̂)} / ‖∇φ‖²_γ`.
    pub fn theta(&self) -> Result<f64> {
        theta(self.phi_at_hat, self.grad_norm_sq_gamma)
    }
}

pub fn theta(phi: f64, grad_norm_sq: f64) -> Result<f64> {
    if !(grad_norm_sq > 0.0) {
        return Err(Error::ZeroGradient);
    }
    Ok(phi.max(0.0) / grad_norm_sq)
}

/// The gradient test that replaces "stop when ∇φ = 0".
pub fn gradient_vanishes(grad_norm_sq: f64, p_hat_norm_sq: f64, eps: f64) -> bool {
    grad_norm_sq <= eps * (1.0 + p_hat_norm_sq)
}

/// `(1 - σ²) min{1/ρ̄, ρ̲} / 2`.
pub fn certificate_multiplier(sigma: f64, rho_lo: f64, rho_hi: f64) -> f64 {
    (1.0 - sigma * sigma) * (1.0 / rho_hi).min(rho_lo) / 2.0
}

/// Lower bound on `φ(p̂)` guaranteed by the relative-error criterion:
/// `(1 - σ²) min{1/ρ̄, ρ̲} / 2 · Σ_i (‖G_i ẑ - x_i‖² + ‖ŵ_i - y_i‖²)`.
pub fn lower_bound_certificate(
    pairs: &[GraphPair],
    requests: &[ResolventRequest],
    sigma: f64,
    rho_lo: f64,
    rho_hi: f64,
) -> f64 {
    let total: f64 = pairs
        .iter()
        .zip(requests)
        .map(|(pair, req)| sq_dist(req.z_hat_mapped(), &pair.x) + sq_dist(req.w_hat(), &pair.y))
        .sum();
    certificate_multiplier(sigma, rho_lo, rho_hi) * total
}

/// A constant `c > 0` with `φ(p̂) >= c ‖∇φ‖²_γ` whenever all pairs pass the
/// relative-error test. Obtained by bounding the gradient norm by the sum of
/// squared residuals: with `M = max(1, max_i ‖G_i‖)`,
/// `‖∇φ‖²_γ <= max(n M²/γ, 2 max(1, (n-1) M²)) Σ_i (‖G_i ẑ - x_i‖² + ‖ŵ_i - y_i‖²)`.
pub fn gradient_bound_constant(
    maps: &[LinearMapHandle],
    gamma: f64,
    sigma: f64,
    rho_lo: f64,
    rho_hi: f64,
) -> f64 {
    let n = (maps.len() + 1) as f64;
    let m = maps.iter().map(|g| g.norm_bound()).fold(1.0, f64::max);
    let m2 = m * m;
    let c_grad = (n * m2 / gamma).max(2.0 * (1.0f64).max((n - 1.0) * m2));
    certificate_multiplier(sigma, rho_lo, rho_hi) / c_grad
}
