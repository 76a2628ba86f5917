//! Inertial-relaxed separator-projection in a γ-weighted product space.
//!
//! Each iteration extrapolates `p̂ = p_k + α_k (p_k - p_{k-1})`, asks an oracle
//! for an affine `φ` that is nonpositive on the target set, and moves to
//! `p_{k+1} = p̂ - β_k max{0, φ(p̂)} / ‖∇φ‖²_γ · ∇φ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{AlphaSchedule, BetaSchedule, InertiaRelaxationBudget};
use crate::space::{GammaGeometry, ProductPoint};

/// The current and previous iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorState {
    p_curr: ProductPoint,
    p_prev: ProductPoint,
    k: usize,
}

impl ProjectorState {
    /// Starts with `p_{-1} = p_0`.
    pub fn new(p0: ProductPoint) -> Self {
        Self {
            p_prev: p0.clone(),
            p_curr: p0,
            k: 0,
        }
    }

    /// Starts from an explicit `p_{-1}`.
    pub fn with_previous(p0: ProductPoint, p_minus1: ProductPoint) -> Self {
        Self {
            p_curr: p0,
            p_prev: p_minus1,
            k: 0,
        }
    }

    pub fn p_curr(&self) -> &ProductPoint {
        &self.p_curr
    }
    pub fn p_prev(&self) -> &ProductPoint {
        &self.p_prev
    }
    pub fn k(&self) -> usize {
        self.k
    }

    /// Shifts `p_{k+1}` in; only two iterates are ever kept.
    pub fn advance(&mut self, p_next: ProductPoint) {
        self.p_prev = std::mem::replace(&mut self.p_curr, p_next);
        self.k += 1;
    }
}

/// `p_k + α (p_k - p_{k-1})`.
pub fn extrapolate(state: &ProjectorState, alpha: f64) -> ProductPoint {
    if alpha == 0.0 {
        return state.p_curr.clone();
    }
    let diff = ProductPoint::axpy_unchecked(-1.0, &state.p_prev, &state.p_curr);
    ProductPoint::axpy_unchecked(alpha, &diff, &state.p_curr)
}

/// An affine separator evaluated at `p̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub phi_at_hat: f64,
    pub grad: ProductPoint,
    pub grad_norm_sq: f64,
}

/// `p̂ - β max{0, φ(p̂)} / ‖∇φ‖²_γ · ∇φ`. With `β = 1` this is the exact
/// projection onto `{φ <= 0}`.
pub fn project_relaxed(
    p_hat: &ProductPoint,
    phi_at_hat: f64,
    grad: &ProductPoint,
    grad_norm_sq: f64,
    beta: f64,
    geom: &GammaGeometry,
) -> Result<ProductPoint> {
    geom.check(p_hat)?;
    geom.check(grad)?;
    if !(grad_norm_sq > 0.0) {
        return Err(Error::ZeroGradient);
    }
    let t = beta * phi_at_hat.max(0.0) / grad_norm_sq;
    Ok(ProductPoint::axpy_unchecked(-t, grad, p_hat))
}

/// Supplies a separator of the target set at the extrapolated point, or
/// `None` when `p̂` is already in the set.
pub trait SeparatorOracle {
    fn cut(&mut self, p_hat: &ProductPoint) -> Result<Option<Cut>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorStep {
    pub alpha: f64,
    pub beta: f64,
    pub p_hat: ProductPoint,
    /// Exact projection of `p̂` onto `{φ <= 0}`.
    pub p_tilde: ProductPoint,
    pub p_next: ProductPoint,
}

/// A recorded trajectory `p_{-1}, p_0, p_1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorHistory {
    pub p_minus1: ProductPoint,
    pub p0: ProductPoint,
    pub steps: Vec<ProjectorStep>,
}

impl ProjectorHistory {
    pub fn new(p_minus1: ProductPoint, p0: ProductPoint) -> Self {
        Self {
            p_minus1,
            p0,
            steps: Vec::new(),
        }
    }

    /// `p_k` for `k >= 0`.
    pub fn point(&self, k: usize) -> &ProductPoint {
        if k == 0 {
            &self.p0
        } else {
            &self.steps[k - 1].p_next
        }
    }

    /// `p_k` for `k >= -1`.
    fn point_signed(&self, k: isize) -> &ProductPoint {
        if k < 0 {
            &self.p_minus1
        } else {
            self.point(k as usize)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorRun {
    pub point: ProductPoint,
    pub iterations: usize,
    /// The oracle reported `p̂` inside the target set.
    pub stopped: bool,
    pub history: Option<ProjectorHistory>,
}

/// Generic driver over a [`SeparatorOracle`].
#[derive(Debug, Clone)]
pub struct InertialProjector {
    geom: GammaGeometry,
    alpha: AlphaSchedule,
    beta: BetaSchedule,
}

impl InertialProjector {
    pub fn new(
        geom: GammaGeometry,
        budget: &InertiaRelaxationBudget,
        alpha: AlphaSchedule,
        beta: BetaSchedule,
    ) -> Result<Self> {
        alpha.validate(budget)?;
        beta.validate(budget)?;
        Ok(Self { geom, alpha, beta })
    }

    pub fn run(
        &self,
        oracle: &mut dyn SeparatorOracle,
        mut state: ProjectorState,
        max_iter: usize,
        keep_history: bool,
    ) -> Result<ProjectorRun> {
        self.geom.check(state.p_curr())?;
        self.geom.check(state.p_prev())?;
        let mut history = keep_history
            .then(|| ProjectorHistory::new(state.p_prev().clone(), state.p_curr().clone()));
        let mut stopped = false;
        while state.k() < max_iter {
            let k = state.k();
            let alpha = self.alpha.at(k);
            let beta = self.beta.at(k);
            let p_hat = extrapolate(&state, alpha);
            let Some(cut) = oracle.cut(&p_hat)? else {
                state.advance(p_hat);
                stopped = true;
                break;
            };
            let p_next = project_relaxed(&p_hat, cut.phi_at_hat, &cut.grad, cut.grad_norm_sq, beta, &self.geom)?;
            if let Some(h) = history.as_mut() {
                let p_tilde =
                    project_relaxed(&p_hat, cut.phi_at_hat, &cut.grad, cut.grad_norm_sq, 1.0, &self.geom)?;
                h.steps.push(ProjectorStep {
                    alpha,
                    beta,
                    p_hat,
                    p_tilde,
                    p_next: p_next.clone(),
                });
            }
            state.advance(p_next);
        }
        Ok(ProjectorRun {
            iterations: state.k(),
            point: state.p_curr,
            stopped,
            history,
        })
    }
}

/// Fejér-type quantities for one step `k -> k+1` against a reference `p*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FejerDiagnostics {
    pub k: usize,
    /// `‖p_k - p*‖²_γ`.
    pub h_k: f64,
    /// `β_k (2 - β_k) ‖p̂_k - p̃_{k+1}‖²_γ`.
    pub s_next: f64,
    /// `2(1 - β̄⁻¹) α_k² + 2 β̄⁻¹ α_k`.
    pub gamma_k: f64,
    /// `h_k - α_k h_{k-1} + γ_k ‖p_k - p_{k-1}‖²_γ`.
    pub mu_k: f64,
    /// Right side minus left side of each inequality; nonnegative in exact
    /// arithmetic.
    pub slack_a: f64,
    pub slack_b: f64,
    pub slack_key: f64,
    /// `μ_k - μ_{k+1}`, when `α_{k+1}` is known.
    pub slack_mu: Option<f64>,
    /// `(μ_0 + α h_k) / q(α) - Σ_{j<=k} ‖p_{j+1} - p_j‖²_γ`.
    pub slack_sum: f64,
}

impl FejerDiagnostics {
    fn worst(&self) -> (&'static str, f64) {
        let mut items = vec![
            ("a", self.slack_a),
            ("b", self.slack_b),
            ("key", self.slack_key),
            ("summability", self.slack_sum),
        ];
        if let Some(m) = self.slack_mu {
            items.push(("mu", m));
        }
        items
            .into_iter()
            .fold(("a", f64::INFINITY), |acc, it| if it.1 < acc.1 { it } else { acc })
    }
}

/// Evaluates the Fejér inequalities along `history`. Any slack below
/// `-tol (1 + h_k)` is reported as a violation at that `k`.
pub fn fejer_check(
    history: &ProjectorHistory,
    p_star: &ProductPoint,
    budget: &InertiaRelaxationBudget,
    geom: &GammaGeometry,
    tol: f64,
) -> Result<Vec<FejerDiagnostics>> {
    let records = fejer_diagnostics(history, p_star, budget, geom)?;
    for r in &records {
        let (which, slack) = r.worst();
        if slack < -tol * (1.0 + r.h_k) {
            return Err(Error::FejerViolation { k: r.k, which, slack });
        }
    }
    Ok(records)
}

/// The raw per-step quantities, without pass/fail judgement.
pub fn fejer_diagnostics(
    history: &ProjectorHistory,
    p_star: &ProductPoint,
    budget: &InertiaRelaxationBudget,
    geom: &GammaGeometry,
) -> Result<Vec<FejerDiagnostics>> {
    geom.check(p_star)?;
    let steps = &history.steps;
    let beta_bar = budget.beta_bar();
    let inv = 1.0 / beta_bar;
    let q_cap = budget.q_at_cap();
    let cap = budget.alpha_cap();

    let h = |k: isize| geom.dist_sq(history.point_signed(k), p_star);
    let step_sq = |k: isize| geom.dist_sq(history.point_signed(k), history.point_signed(k - 1));
    let gamma_of = |a: f64| 2.0 * (1.0 - inv) * a * a + 2.0 * inv * a;
    let mu = |k: usize, alpha: f64| -> Result<f64> {
        let k = k as isize;
        Ok(h(k)? - alpha * h(k - 1)? + gamma_of(alpha) * step_sq(k)?)
    };

    let mut out = Vec::with_capacity(steps.len());
    let mu0 = match steps.first() {
        Some(s) => mu(0, s.alpha)?,
        None => return Ok(out),
    };
    let mut partial = 0.0;
    for (k, st) in steps.iter().enumerate() {
        let ki = k as isize;
        let (a, b) = (st.alpha, st.beta);
        let h_prev = h(ki - 1)?;
        let h_k = h(ki)?;
        let h_next = h(ki + 1)?;
        let back = step_sq(ki)?;
        let fwd = step_sq(ki + 1)?;
        let s_next = b * (2.0 - b) * geom.dist_sq(&st.p_hat, &st.p_tilde)?;
        let lhs = h_next - h_k - a * (h_k - h_prev);
        let gamma_k = gamma_of(a);
        let mu_k = mu(k, a)?;
        let slack_mu = match steps.get(k + 1) {
            Some(next) => Some(mu_k - mu(k + 1, next.alpha)?),
            None => None,
        };
        partial += fwd;
        out.push(FejerDiagnostics {
            k,
            h_k,
            s_next,
            gamma_k,
            mu_k,
            slack_a: a * (1.0 + a) * back - s_next - lhs,
            slack_b: gamma_k * back - (2.0 - beta_bar) * inv * (1.0 - a) * fwd - lhs,
            slack_key: geom.dist_sq(&st.p_hat, p_star)? - h_next - s_next,
            slack_mu,
            slack_sum: (mu0 + cap * h_k) / q_cap - partial,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn pt2(a: f64, b: f64) -> ProductPoint {
        ProductPoint::new(array![a], vec![array![b]]).unwrap()
    }

    #[test]
    fn extrapolation_examples() {
        let p0 = pt2(1.0, 1.0);
        let state = ProjectorState::with_previous(p0.clone(), pt2(0.0, 0.0));
        assert_eq!(extrapolate(&state, 0.0), p0);
        let hat = extrapolate(&state, 0.1);
        assert!(hat.max_abs_diff(&pt2(1.1, 1.1)) < 1e-15);
        let fresh = ProjectorState::new(p0.clone());
        assert_eq!(extrapolate(&fresh, 0.3), p0);
    }

    #[test]
    fn relaxed_projection_examples() {
        let geom = GammaGeometry::new(1.0, vec![1, 1]).unwrap();
        // φ(p) = p_1 - 1
        let grad = pt2(1.0, 0.0);
        let p_hat = pt2(2.0, 0.0);
        let exact = project_relaxed(&p_hat, 1.0, &grad, 1.0, 1.0, &geom).unwrap();
        assert_eq!(exact, pt2(1.0, 0.0));
        let over = project_relaxed(&p_hat, 1.0, &grad, 1.0, 1.5, &geom).unwrap();
        assert_eq!(over, pt2(0.5, 0.0));
        let inside = project_relaxed(&pt2(0.5, 3.0), -0.5, &grad, 1.0, 1.5, &geom).unwrap();
        assert_eq!(inside, pt2(0.5, 3.0));
        assert!(project_relaxed(&p_hat, 1.0, &grad, 0.0, 1.0, &geom).is_err());
    }

    #[test]
    fn gamma_weighted_projection_lands_on_hyperplane() {
        // φ(p) = γ<a_z, z> + <a_w, w> - c in the γ-geometry has gradient a
        let geom = GammaGeometry::new(3.0, vec![2, 1]).unwrap();
        let a = ProductPoint::new(array![1.0, -2.0], vec![array![0.5]]).unwrap();
        let p_hat = ProductPoint::new(array![4.0, 1.0], vec![array![2.0]]).unwrap();
        let c = 1.0;
        let phi = geom.inner(&a, &p_hat).unwrap() - c;
        let out = project_relaxed(&p_hat, phi, &a, geom.norm_sq(&a).unwrap(), 1.0, &geom).unwrap();
        assert!((geom.inner(&a, &out).unwrap() - c).abs() < 1e-12);
    }

    /// The polyhedron `{p : <a_j, p>_γ <= c_j}`, cut at its most violated row.
    struct Polyhedron {
        geom: GammaGeometry,
        rows: Vec<(ProductPoint, f64)>,
    }

    impl SeparatorOracle for Polyhedron {
        fn cut(&mut self, p_hat: &ProductPoint) -> Result<Option<Cut>> {
            let mut best: Option<(f64, &ProductPoint)> = None;
            for (a, c) in &self.rows {
                let v = self.geom.inner(a, p_hat)? - c;
                if v > 0.0 && best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, a));
                }
            }
            Ok(best.map(|(phi, a)| Cut {
                phi_at_hat: phi,
                grad: a.clone(),
                grad_norm_sq: self.geom.norm_sq(a).unwrap(),
            }))
        }
    }

    fn polyhedron() -> Polyhedron {
        let geom = GammaGeometry::new(2.0, vec![1, 1]).unwrap();
        Polyhedron {
            geom,
            rows: vec![
                (pt2(1.0, 1.0), 1.0),
                (pt2(-1.0, 2.0), 2.0),
                (pt2(0.5, -1.0), 0.5),
            ],
        }
    }

    fn run_polyhedron(alpha: f64, alpha_bar: f64, beta: f64, start: ProductPoint) -> ProjectorRun {
        let mut oracle = polyhedron();
        let budget = InertiaRelaxationBudget::with_beta_lo(alpha_bar, alpha, beta.min(1.0)).unwrap();
        let engine = InertialProjector::new(
            oracle.geom.clone(),
            &budget,
            AlphaSchedule::Constant(alpha),
            BetaSchedule::Constant(beta),
        )
        .unwrap();
        engine
            .run(&mut oracle, ProjectorState::new(start), 200, true)
            .unwrap()
    }

    #[test]
    fn polyhedron_run_satisfies_fejer() {
        let start = pt2(7.0, 9.0);
        let alpha_bar = 0.17;
        let budget = InertiaRelaxationBudget::new(alpha_bar, 0.1).unwrap();
        let run = run_polyhedron(0.1, alpha_bar, budget.beta_bar(), start);
        let history = run.history.as_ref().unwrap();
        assert!(!history.steps.is_empty());
        // any point of the set will do; the origin satisfies every row
        let p_star = pt2(0.0, 0.0);
        let geom = polyhedron().geom;
        let report = fejer_check(history, &p_star, &budget, &geom, 1e-12).unwrap();
        assert_eq!(report.len(), history.steps.len());
        // the final point is (near) feasible
        let mut oracle = polyhedron();
        let viol = oracle.cut(&run.point).unwrap().map_or(0.0, |c| c.phi_at_hat);
        assert!(viol < 1e-6, "violation {viol}");
    }

    #[test]
    fn classical_case_is_fejer_monotone() {
        let budget = InertiaRelaxationBudget::with_beta_lo(0.3, 0.0, 1.0).unwrap();
        let run = run_polyhedron(0.0, 0.3, 1.0, pt2(-5.0, 6.0));
        let history = run.history.unwrap();
        let geom = polyhedron().geom;
        let p_star = pt2(0.0, 0.5);
        let report = fejer_check(&history, &p_star, &budget, &geom, 1e-12).unwrap();
        for r in &report {
            let h_next = geom.dist_sq(history.point(r.k + 1), &p_star).unwrap();
            assert!(h_next <= r.h_k - r.s_next + 1e-12 * (1.0 + r.h_k));
        }
    }

    #[test]
    fn corrupted_history_is_flagged() {
        let budget = InertiaRelaxationBudget::new(0.17, 0.1).unwrap();
        let run = run_polyhedron(0.1, 0.17, budget.beta_bar(), pt2(7.0, 9.0));
        let mut history = run.history.unwrap();
        // push p_1 far away from the set
        history.steps[0].p_next = pt2(50.0, 50.0);
        let geom = polyhedron().geom;
        let err = fejer_check(&history, &pt2(0.0, 0.0), &budget, &geom, 1e-12).unwrap_err();
        assert!(matches!(err, Error::FejerViolation { k: 0, .. }));
    }

    #[test]
    fn stops_inside_the_set() {
        let run = run_polyhedron(0.0, 0.3, 1.0, pt2(0.0, 0.0));
        assert!(run.stopped);
        assert_eq!(run.iterations, 1);
        assert_eq!(run.point, pt2(0.0, 0.0));
    }

    #[test]
    fn state_keeps_two_iterates() {
        let mut s = ProjectorState::new(pt2(1.0, 2.0));
        s.advance(pt2(3.0, 4.0));
        s.advance(pt2(5.0, 6.0));
        assert_eq!(s.k(), 2);
        assert_eq!(s.p_prev(), &pt2(3.0, 4.0));
        assert_eq!(s.p_curr(), &pt2(5.0, 6.0));
    }
}
