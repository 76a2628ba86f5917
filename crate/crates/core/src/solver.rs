//! Relative-error inertial-relaxed projective splitting for
//! `0 ∈ Σ_{i<n} G_i* T_i(G_i z) + T_n(z)`.
//!
//! One outer iteration:
//! 1. extrapolate `(z, w)` and set `ŵ_n = -Σ_{i<n} G_i* ŵ_i`;
//! 2. evaluate each inexact resolvent at `G_i ẑ + ρ_i ŵ_i`;
//! 3. stop if the separator gradient vanishes;
//! 4. move along the gradient: `z⁺ = ẑ - γ⁻¹ β θ s`, `w_i⁺ = ŵ_i - β θ (x_i - G_i x_n)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    norm, GraphPair, Identity, LinearMapHandle, MonotoneOperator, ResolventFailure, ResolventRequest,
};
use crate::params::{beta_from_alpha, AlphaSchedule, BetaSchedule, InertiaRelaxationBudget};
use crate::projector::{extrapolate, project_relaxed, ProjectorHistory, ProjectorState, ProjectorStep};
use crate::separator::{gradient_vanishes, SeparatorSample, GRAD_EPS};
use crate::space::{GammaGeometry, ProductPoint, Vector};

/// One operator `T_i` with its linear map `G_i`.
#[derive(Debug)]
pub struct MonotoneBlock {
    pub operator: Box<dyn MonotoneOperator>,
    pub map: LinearMapHandle,
}

impl MonotoneBlock {
    pub fn new(operator: Box<dyn MonotoneOperator>, map: LinearMapHandle) -> Self {
        Self { operator, map }
    }

    /// A block acting directly on `z`.
    pub fn direct(operator: Box<dyn MonotoneOperator>) -> Self {
        let d = operator.dim();
        Self::new(operator, Box::new(Identity::new(d)))
    }
}

/// The blocks `T_1, ..., T_n`; the last one must have `G_n = I`.
#[derive(Debug)]
pub struct SplittingProblem {
    operators: Vec<Box<dyn MonotoneOperator>>,
    /// `G_1, ..., G_{n-1}`.
    maps: Vec<LinearMapHandle>,
    dims: Vec<usize>,
}

impl SplittingProblem {
    pub fn new(blocks: Vec<MonotoneBlock>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::Config(format!(
                "a splitting needs at least two blocks, got {}",
                blocks.len()
            )));
        }
        let n = blocks.len();
        if !blocks[n - 1].map.is_identity() {
            return Err(Error::Config("the last block's linear map must be the identity".into()));
        }
        let d0 = blocks[n - 1].operator.dim();
        let mut dims = vec![d0];
        let mut operators = Vec::with_capacity(n);
        let mut maps = Vec::with_capacity(n - 1);
        for (i, block) in blocks.into_iter().enumerate() {
            let g = &block.map;
            if g.in_dim() != d0 {
                return Err(Error::DimensionMismatch {
                    block: i + 1,
                    expected: d0,
                    found: g.in_dim(),
                });
            }
            if g.out_dim() != block.operator.dim() {
                return Err(Error::DimensionMismatch {
                    block: i + 1,
                    expected: g.out_dim(),
                    found: block.operator.dim(),
                });
            }
            if i + 1 < n {
                dims.push(g.out_dim());
                maps.push(block.map);
            }
            operators.push(block.operator);
        }
        Ok(Self { operators, maps, dims })
    }

    pub fn n_blocks(&self) -> usize {
        self.operators.len()
    }

    /// `(d_0, d_1, ..., d_{n-1})`.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn maps(&self) -> &[LinearMapHandle] {
        &self.maps
    }

    pub fn operator(&self, i: usize) -> &dyn MonotoneOperator {
        self.operators[i].as_ref()
    }

    pub fn geometry(&self, gamma: f64) -> Result<GammaGeometry> {
        GammaGeometry::new(gamma, self.dims.clone())
    }

    /// `w_n = -Σ_{i<n} G_i* w_i`.
    pub fn w_last(&self, p: &ProductPoint) -> Vector {
        w_last(p, &self.maps)
    }

    /// `G_i z` for `i = 1..n`.
    fn mapped(&self, z: &Vector) -> Vec<Vector> {
        self.maps
            .iter()
            .map(|g| g.apply(z))
            .chain(std::iter::once(z.clone()))
            .collect()
    }
}

fn w_last(p: &ProductPoint, maps: &[LinearMapHandle]) -> Vector {
    let mut acc = Vector::zeros(p.z().len());
    for (g, w) in maps.iter().zip(p.w()) {
        acc -= &g.adjoint(w);
    }
    acc
}

/// `(p̂, ŵ_n)` from the current and previous iterates.
pub fn extrapolate_all(
    p: &ProductPoint,
    p_prev: &ProductPoint,
    alpha: f64,
    maps: &[LinearMapHandle],
) -> (ProductPoint, Vector) {
    let state = ProjectorState::with_previous(p.clone(), p_prev.clone());
    let p_hat = extrapolate(&state, alpha);
    let w_n = w_last(&p_hat, maps);
    (p_hat, w_n)
}

/// Per-block resolvent stepsizes `ρ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepsizes {
    Uniform(f64),
    PerBlock(Vec<f64>),
}

impl Stepsizes {
    pub fn rho(&self, i: usize) -> f64 {
        match self {
            Self::Uniform(r) => *r,
            Self::PerBlock(v) => v[i],
        }
    }

    /// `(ρ̲, ρ̄)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Uniform(r) => (*r, *r),
            Self::PerBlock(v) => (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(0.0, f64::max),
            ),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let ok = |r: f64| r > 0.0 && r.is_finite();
        match self {
            Self::Uniform(r) if ok(*r) => Ok(()),
            Self::PerBlock(v) if v.len() == n && v.iter().all(|&r| ok(r)) => Ok(()),
            other => Err(Error::Config(format!(
                "stepsizes {other:?} must be positive and finite, one per block ({n})"
            ))),
        }
    }
}

/// Library-level stopping rule on `max(residual_primal, residual_dual)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub residual_tol: Option<f64>,
}

impl Default for Termination {
    fn default() -> Self {
        Self {
            residual_tol: Some(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub budget: InertiaRelaxationBudget,
    pub alpha: AlphaSchedule,
    pub beta: BetaSchedule,
    pub sigma: f64,
    pub gamma: f64,
    pub rho: Stepsizes,
    pub max_outer: usize,
    pub termination: Termination,
    /// `ε_grad` in the vanishing-gradient test.
    pub grad_eps: f64,
    /// Evaluate the block resolvents on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let alpha_bar = 0.17;
        let budget = InertiaRelaxationBudget::new(alpha_bar, 0.1).expect("default budget is admissible");
        Self {
            beta: BetaSchedule::Constant(budget.beta_bar()),
            budget,
            alpha: AlphaSchedule::Constant(0.1),
            sigma: 0.99,
            gamma: 1.0,
            rho: Stepsizes::Uniform(1.0),
            max_outer: 10_000,
            termination: Termination::default(),
            grad_eps: GRAD_EPS,
            parallel: false,
        }
    }
}

impl SolverConfig {
    /// Noninertial, unrelaxed, exact-resolvent projective splitting.
    pub fn classical() -> Self {
        let budget = InertiaRelaxationBudget::with_beta_lo(0.3, 0.0, 1.0).expect("classical budget is admissible");
        Self {
            budget,
            alpha: AlphaSchedule::Constant(0.0),
            beta: BetaSchedule::Constant(1.0),
            sigma: 0.0,
            ..Self::default()
        }
    }

    /// Constant `α_k = alpha` and `β_k = β̄(alpha_bar)`.
    pub fn inertial(alpha: f64, alpha_bar: f64) -> Result<Self> {
        let budget = InertiaRelaxationBudget::new(alpha_bar, alpha)?;
        let beta = beta_from_alpha(alpha_bar)?;
        Ok(Self {
            budget,
            alpha: AlphaSchedule::Constant(alpha),
            beta: BetaSchedule::Constant(beta),
            ..Self::default()
        })
    }

    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        self.alpha.validate(&self.budget)?;
        self.beta.validate(&self.budget)?;
        crate::error::check_domain("sigma", self.sigma, "[0, 1)", (0.0..1.0).contains(&self.sigma))?;
        crate::error::check_domain("gamma", self.gamma, "(0, inf)", self.gamma > 0.0)?;
        crate::error::check_domain("grad_eps", self.grad_eps, "[0, inf)", self.grad_eps >= 0.0)?;
        if let Some(t) = self.termination.residual_tol {
            crate::error::check_domain("residual_tol", t, "[0, inf)", t >= 0.0)?;
        }
        self.rho.validate(n_blocks)
    }
}

/// Application hook evaluated at each new `z`; may request termination.
pub trait ObjectiveMonitor {
    fn objective(&mut self, z: &Vector) -> f64;
    fn should_stop(&mut self, value: f64) -> bool;
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    pub alpha_k: f64,
    pub beta_k: f64,
    pub theta_k: f64,
    pub phi_at_hat: f64,
    pub grad_norm_sq_gamma: f64,
    /// `max_i ‖G_i z_k - x_i‖`.
    pub residual_primal: f64,
    /// `max_i ‖w_i - y_i‖`, with `w_n = -Σ G_i* w_i`.
    pub residual_dual: f64,
    pub inner_iters: Vec<usize>,
    /// Application objective at `z_{k+1}`.
    pub objective: Option<f64>,
    /// `‖p_{k+1} - p_k‖_γ`, the step taken by this iteration.
    pub step_norm: f64,
}

impl IterateRecord {
    pub const FIELDS: [&'static str; 11] = [
        "k",
        "alpha_k",
        "beta_k",
        "theta_k",
        "phi_at_hat",
        "grad_norm_sq_gamma",
        "residual_primal",
        "residual_dual",
        "inner_iters",
        "objective",
        "step_norm",
    ];

    pub fn max_residual(&self) -> f64 {
        self.residual_primal.max(self.residual_dual)
    }
}

/// Append-only per-iteration log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IterateTrace {
    records: Vec<IterateRecord>,
}

impl IterateTrace {
    pub fn records(&self) -> &[IterateRecord] {
        &self.records
    }
    pub fn len(&self) -> usize {
        self.records.len()
    }
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }
    pub(crate) fn push(&mut self, r: IterateRecord) {
        self.records.push(r);
    }
}

impl From<Vec<IterateRecord>> for IterateTrace {
    fn from(records: Vec<IterateRecord>) -> Self {
        Self { records }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Continuing,
    /// The separator gradient vanished: `x_n` solves the inclusion.
    StoppedStep3,
    Converged,
    CapReached,
    /// Block `block` (1-based) could not meet the relative-error test.
    Failed {
        block: usize,
        steps: usize,
        defect: f64,
        allowed: f64,
    },
}

impl Status {
    pub fn is_success(&self) -> bool {
        matches!(self, Status::Converged | Status::StoppedStep3)
    }
}

/// Everything produced by one outer iteration.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub status: Status,
    pub record: Option<IterateRecord>,
    pub p_hat: ProductPoint,
    pub requests: Vec<ResolventRequest>,
    pub sample: Option<SeparatorSample>,
    /// `φ(p̂)` after the contract clamp.
    pub phi: f64,
    pub p_next: Option<ProductPoint>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub point: ProductPoint,
    pub trace: IterateTrace,
    pub status: Status,
    /// Graph pairs of the last completed iteration; `pairs[n-1].x` is the
    /// primal candidate.
    pub last_pairs: Vec<GraphPair>,
    pub history: Option<ProjectorHistory>,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// `x_n` of the last iteration, or `z` when no iteration ran.
    pub fn primal(&self) -> &Vector {
        self.last_pairs.last().map(|p| &p.x).unwrap_or(self.point.z())
    }
}

/// Stepwise driver; [`solve`] runs it to completion.
pub struct Solver<'a> {
    problem: &'a SplittingProblem,
    config: SolverConfig,
    geom: GammaGeometry,
    state: ProjectorState,
    warm: Vec<Option<Vector>>,
    trace: IterateTrace,
    last_pairs: Vec<GraphPair>,
    history: Option<ProjectorHistory>,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a SplittingProblem, config: SolverConfig, p0: ProductPoint) -> Result<Self> {
        let p_prev = p0.clone();
        Self::with_previous(problem, config, p0, p_prev)
    }

    /// Starts from an explicit `p_{-1}` instead of `p_{-1} = p_0`.
    pub fn with_previous(
        problem: &'a SplittingProblem,
        config: SolverConfig,
        p0: ProductPoint,
        p_minus1: ProductPoint,
    ) -> Result<Self> {
        config.validate(problem.n_blocks())?;
        let geom = problem.geometry(config.gamma)?;
        geom.check(&p0)?;
        geom.check(&p_minus1)?;
        Ok(Self {
            problem,
            warm: vec![None; problem.n_blocks()],
            config,
            geom,
            state: ProjectorState::with_previous(p0, p_minus1),
            trace: IterateTrace::default(),
            last_pairs: Vec::new(),
            history: None,
        })
    }

    /// Records `(p̂, p̃, p_{k+1})` for every step, for Fejér diagnostics.
    pub fn record_history(mut self) -> Self {
        self.history = Some(ProjectorHistory::new(self.state.p_prev().clone(), self.state.p_curr().clone()));
        self
    }

    pub fn geometry(&self) -> &GammaGeometry {
        &self.geom
    }
    pub fn point(&self) -> &ProductPoint {
        self.state.p_curr()
    }
    pub fn k(&self) -> usize {
        self.state.k()
    }
    pub fn trace(&self) -> &IterateTrace {
        &self.trace
    }

    fn resolve_all(&self, requests: &[ResolventRequest]) -> Vec<std::result::Result<GraphPair, ResolventFailure>> {
        let call = |i: usize| {
            self.problem.operators[i].inexact_resolvent(&requests[i], self.warm[i].as_ref())
        };
        if self.config.parallel {
            (0..requests.len()).into_par_iter().map(call).collect()
        } else {
            (0..requests.len()).map(call).collect()
        }
    }

    /// Runs Steps 1 to 4 once and advances the state unless the iteration
    /// stopped or failed.
    pub fn step(&mut self, monitor: Option<&mut dyn ObjectiveMonitor>) -> Result<IterationOutcome> {
        let k = self.state.k();
        let cfg = &self.config;
        let alpha = cfg.alpha.at(k);
        let beta = cfg.beta.at(k);
        let maps = self.problem.maps();
        let n = self.problem.n_blocks();

        let (p_hat, w_hat_n) = extrapolate_all(self.state.p_curr(), self.state.p_prev(), alpha, maps);
        let mapped_hat = self.problem.mapped(p_hat.z());
        let mut requests = Vec::with_capacity(n);
        for (i, gz) in mapped_hat.into_iter().enumerate() {
            let w = if i + 1 < n { p_hat.w()[i].clone() } else { w_hat_n.clone() };
            requests.push(ResolventRequest::new(gz, w, cfg.rho.rho(i), cfg.sigma)?);
        }

        let mut pairs = Vec::with_capacity(n);
        for (i, r) in self.resolve_all(&requests).into_iter().enumerate() {
            match r {
                Ok(p) => pairs.push(p),
                Err(f) => {
                    return Ok(IterationOutcome {
                        status: Status::Failed {
                            block: i + 1,
                            steps: f.steps,
                            defect: f.defect,
                            allowed: f.allowed,
                        },
                        record: None,
                        p_hat,
                        requests,
                        sample: None,
                        phi: f64::NAN,
                        p_next: None,
                    })
                }
            }
        }

        // residuals at the current (not extrapolated) iterate
        let p = self.state.p_curr();
        let mapped = self.problem.mapped(p.z());
        let w_n = self.problem.w_last(p);
        let mut residual_primal: f64 = 0.0;
        let mut residual_dual: f64 = 0.0;
        for (i, pair) in pairs.iter().enumerate() {
            residual_primal = residual_primal.max(norm(&(&mapped[i] - &pair.x)));
            let w = if i + 1 < n { &p.w()[i] } else { &w_n };
            residual_dual = residual_dual.max(norm(&(w - &pair.y)));
        }
        let inner_iters: Vec<usize> = pairs.iter().map(|p| p.inner_iters).collect();
        for (slot, pair) in self.warm.iter_mut().zip(&pairs) {
            *slot = Some(pair.x.clone());
        }

        let sample = SeparatorSample::assemble(pairs, &p_hat, maps, &self.geom)?;
        let grad_sq = sample.grad_norm_sq_gamma();
        let mut record = IterateRecord {
            k,
            alpha_k: alpha,
            beta_k: beta,
            theta_k: 0.0,
            phi_at_hat: sample.phi_at_hat(),
            grad_norm_sq_gamma: grad_sq,
            residual_primal,
            residual_dual,
            inner_iters,
            objective: None,
            step_norm: 0.0,
        };

        let p_hat_sq = self.geom.norm_sq(&p_hat)?;
        if gradient_vanishes(grad_sq, p_hat_sq, cfg.grad_eps) {
            record.step_norm = self.geom.dist_sq(&p_hat, self.state.p_curr())?.sqrt();
            self.last_pairs = sample.pairs().to_vec();
            self.trace.push(record.clone());
            return Ok(IterationOutcome {
                status: Status::StoppedStep3,
                record: Some(record),
                p_hat,
                requests,
                phi: sample.phi_at_hat().max(0.0),
                sample: Some(sample),
                p_next: None,
            });
        }

        let phi = sample.certified_phi(k, &requests)?;
        let theta = phi / grad_sq;
        record.theta_k = theta;
        let t = beta * theta;
        let z_next = p_hat.z() - &(sample.s() * (t / cfg.gamma));
        let w_next: Vec<Vector> = p_hat
            .w()
            .iter()
            .zip(sample.grad().w())
            .map(|(w, g)| w - &(g * t))
            .collect();
        let p_next = ProductPoint::new(z_next, w_next)?;
        record.step_norm = self.geom.dist_sq(&p_next, self.state.p_curr())?.sqrt();

        if let Some(h) = self.history.as_mut() {
            let p_tilde = project_relaxed(&p_hat, phi, sample.grad(), grad_sq, 1.0, &self.geom)?;
            h.steps.push(ProjectorStep {
                alpha,
                beta,
                p_hat: p_hat.clone(),
                p_tilde,
                p_next: p_next.clone(),
            });
        }

        let mut status = Status::Continuing;
        if let Some(m) = monitor {
            let value = m.objective(p_next.z());
            record.objective = Some(value);
            if m.should_stop(value) {
                status = Status::Converged;
            }
        }
        if let Some(tol) = cfg.termination.residual_tol {
            if record.max_residual() <= tol {
                status = Status::Converged;
            }
        }

        self.last_pairs = sample.pairs().to_vec();
        self.trace.push(record.clone());
        self.state.advance(p_next.clone());
        if status == Status::Continuing && self.state.k() >= cfg.max_outer {
            status = Status::CapReached;
        }
        Ok(IterationOutcome {
            status,
            record: Some(record),
            p_hat,
            requests,
            sample: Some(sample),
            phi,
            p_next: Some(p_next),
        })
    }

    /// Iterates until a stopping rule fires, the cap is hit, or a block fails.
    pub fn run(mut self, mut monitor: Option<&mut dyn ObjectiveMonitor>) -> Result<SolveResult> {
        let mut status = if self.config.max_outer == 0 {
            Status::CapReached
        } else {
            Status::Continuing
        };
        while status == Status::Continuing {
            let m: Option<&mut dyn ObjectiveMonitor> = match monitor {
                Some(ref mut m) => Some(&mut **m),
                None => None,
            };
            let out = self.step(m)?;
            status = out.status;
            if status == Status::StoppedStep3 {
                self.state.advance(out.p_hat);
            }
        }
        Ok(self.finish(status))
    }

    pub fn finish(self, status: Status) -> SolveResult {
        SolveResult {
            point: self.state.p_curr().clone(),
            trace: self.trace,
            status,
            last_pairs: self.last_pairs,
            history: self.history,
        }
    }
}

/// Runs the splitting from `p0` (zero when `None`).
pub fn solve(
    problem: &SplittingProblem,
    config: &SolverConfig,
    p0: Option<ProductPoint>,
    monitor: Option<&mut dyn ObjectiveMonitor>,
) -> Result<SolveResult> {
    let p0 = match p0 {
        Some(p) => p,
        None => problem.geometry(config.gamma)?.zeros(),
    };
    Solver::new(problem, config.clone(), p0)?.run(monitor)
}
