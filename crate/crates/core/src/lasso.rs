//! `min_x ½‖Qx - b‖² + λ‖x‖₁` as a splitting over row blocks of `Q`.
//!
//! The rows are cut into `r` cells; each cell gives an affine block
//! `T_i(x) = Q_iᵀ(Q_i x - b_i)` and the last block is `∂(λ‖·‖₁)`, all with
//! `G_i = I`.

use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};
use crate::operators::{soft_threshold, AffineBlockOperator, CgCap, L1Operator};
use crate::solver::{
    solve, MonotoneBlock, ObjectiveMonitor, SolveResult, SolverConfig, SplittingProblem, Status, Termination,
};
use crate::space::Vector;

/// Name recorded in manifests for the instance generator.
pub const GENERATOR: &str = "chacha8-normal-bernoulli";

/// Contiguous cells of `⌊m/r⌋` rows, the remainder appended to the last.
pub fn partition_rows(m: usize, r: usize) -> Result<Vec<Vec<usize>>> {
    if r == 0 || r > m {
        return Err(Error::Partition(format!("cannot cut {m} rows into {r} nonempty cells")));
    }
    let size = m / r;
    Ok((0..r)
        .map(|i| {
            let end = if i + 1 == r { m } else { (i + 1) * size };
            (i * size..end).collect()
        })
        .collect())
}

/// Checks that `cells` are nonempty, disjoint and cover `0..m`.
pub fn validate_partition(cells: &[Vec<usize>], m: usize) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::Partition("no cells".into()));
    }
    let empty: Vec<usize> = cells.iter().enumerate().filter(|(_, c)| c.is_empty()).map(|(i, _)| i).collect();
    if !empty.is_empty() {
        return Err(Error::Partition(format!("empty cells {empty:?}")));
    }
    let mut seen = vec![0usize; m];
    let mut out_of_range = Vec::new();
    for &j in cells.iter().flatten() {
        match seen.get_mut(j) {
            Some(c) => *c += 1,
            None => out_of_range.push(j),
        }
    }
    if !out_of_range.is_empty() {
        return Err(Error::Partition(format!("rows {out_of_range:?} are out of range 0..{m}")));
    }
    let repeated: Vec<usize> = (0..m).filter(|&j| seen[j] > 1).collect();
    if !repeated.is_empty() {
        return Err(Error::Partition(format!("rows {repeated:?} appear in more than one cell")));
    }
    let missing: Vec<usize> = (0..m).filter(|&j| seen[j] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::Partition(format!("rows {missing:?} are not covered")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ = 0.1 ‖Qᵀb‖_∞`.
    Default,
    Fixed(f64),
}

/// `0.1 ‖Qᵀb‖_∞`.
pub fn default_lambda(q: &Array2<f64>, b: &Vector) -> f64 {
    0.1 * q.t().dot(b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    q: Array2<f64>,
    b: Vector,
    lambda: f64,
    partition: Vec<Vec<usize>>,
}

impl LassoProblem {
    pub fn new(q: Array2<f64>, b: Vector, partition: Vec<Vec<usize>>, rule: LambdaRule) -> Result<Self> {
        if q.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                block: 0,
                expected: q.nrows(),
                found: b.len(),
            });
        }
        if q.nrows() == 0 || q.ncols() == 0 {
            return Err(Error::Config("empty LASSO data".into()));
        }
        if !q.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("LASSO data"));
        }
        validate_partition(&partition, q.nrows())?;
        let lambda = match rule {
            LambdaRule::Default => default_lambda(&q, &b),
            LambdaRule::Fixed(l) => {
                check_domain("lambda", l, "[0, inf)", l >= 0.0)?;
                l
            }
        };
        Ok(Self {
            q,
            b,
            lambda,
            partition,
        })
    }

    /// Contiguous partition into `r` cells with the default λ.
    pub fn with_blocks(q: Array2<f64>, b: Vector, r: usize) -> Result<Self> {
        let partition = partition_rows(q.nrows(), r)?;
        Self::new(q, b, partition, LambdaRule::Default)
    }

    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }
    pub fn b(&self) -> &Vector {
        &self.b
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }
    pub fn rows(&self) -> usize {
        self.q.nrows()
    }
    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn partition_sizes(&self) -> Vec<usize> {
        self.partition.iter().map(Vec::len).collect()
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                block: 0,
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `½‖Qx - b‖² + λ‖x‖₁`.
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective_unchecked(x))
    }

    fn objective_unchecked(&self, x: &Vector) -> f64 {
        let r = self.q.dot(x) - &self.b;
        0.5 * r.dot(&r) + self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `Qᵀ(Qx - b)`.
    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        Ok(self.q.t().dot(&(self.q.dot(x) - &self.b)))
    }

    /// `(Q_i, b_i)` for each cell.
    pub fn blocks(&self) -> Vec<(Array2<f64>, Vector)> {
        self.partition
            .iter()
            .map(|cell| (self.q.select(Axis(0), cell), self.b.select(Axis(0), cell)))
            .collect()
    }

    /// The `r + 1` block splitting.
    pub fn splitting(&self, cap: CgCap) -> Result<SplittingProblem> {
        let mut blocks = Vec::with_capacity(self.partition.len() + 1);
        for (q_i, b_i) in self.blocks() {
            let op = AffineBlockOperator::new(q_i, b_i)?.with_cg_cap(cap);
            blocks.push(MonotoneBlock::direct(Box::new(op)));
        }
        blocks.push(MonotoneBlock::direct(Box::new(L1Operator::new(self.lambda, self.dim())?)));
        SplittingProblem::new(blocks)
    }

    /// Largest violation of `0 ∈ Qᵀ(Qx - b) + λ ∂‖x‖₁`: on the support
    /// `|g_j + λ sign(x_j)|`, off it `max(0, |g_j| - λ)`.
    pub fn optimality_violation(&self, x: &Vector) -> Result<f64> {
        let g = self.gradient(x)?;
        Ok(x.iter()
            .zip(g.iter())
            .map(|(&xj, &gj)| {
                if xj != 0.0 {
                    (gj + self.lambda * xj.signum()).abs()
                } else {
                    (gj.abs() - self.lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max))
    }
}

/// The LASSO data together with its splitting.
pub fn build_problem(
    q: Array2<f64>,
    b: Vector,
    partition: Vec<Vec<usize>>,
    rule: LambdaRule,
) -> Result<(LassoProblem, SplittingProblem)> {
    let lasso = LassoProblem::new(q, b, partition, rule)?;
    let split = lasso.splitting(CgCap::default())?;
    Ok((lasso, split))
}

/// `|F - F*| / F* <= tol`, or `|F - F*| <= tol` when `F* <= 0`.
pub fn stop_criterion(f: f64, f_star: f64, tol: f64) -> bool {
    let gap = (f - f_star).abs();
    if f_star > 0.0 {
        gap / f_star <= tol
    } else {
        gap <= tol
    }
}

/// Monitor that evaluates the LASSO objective and applies [`stop_criterion`].
#[derive(Debug, Clone)]
pub struct ObjectiveStop<'a> {
    pub problem: &'a LassoProblem,
    pub f_star: Option<f64>,
    pub tol: f64,
}

impl ObjectiveMonitor for ObjectiveStop<'_> {
    fn objective(&mut self, z: &Vector) -> f64 {
        self.problem.objective_unchecked(z)
    }
    fn should_stop(&mut self, value: f64) -> bool {
        self.f_star.is_some_and(|f| stop_criterion(value, f, self.tol))
    }
}

/// Largest eigenvalue of `QᵀQ` by power iteration from a fixed start.
pub fn power_iteration(q: &Array2<f64>, iters: usize) -> f64 {
    let d = q.ncols();
    let mut v = Vector::from_shape_fn(d, |j| 1.0 + (j as f64) / (d as f64));
    let mut est = 0.0;
    for _ in 0..iters {
        let nv = v.dot(&v).sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        v /= nv;
        let u = q.t().dot(&q.dot(&v));
        est = v.dot(&u);
        v = u;
    }
    est
}

#[derive(Debug, Clone, PartialEq)]
pub struct IstaResult {
    pub x: Vector,
    pub objective: f64,
    pub iterations: usize,
    pub lipschitz: f64,
}

/// Proximal gradient `x ← S(x - Qᵀ(Qx - b)/L, λ/L)` until the fixed-point
/// residual `‖x_{k+1} - x_k‖` is at most `tol`.
pub fn ista_oracle(problem: &LassoProblem, tol: f64, cap: usize) -> Result<IstaResult> {
    let q = problem.q();
    let lipschitz = 1.01 * power_iteration(q, 200);
    let d = problem.dim();
    if lipschitz == 0.0 {
        let x = Vector::zeros(d);
        return Ok(IstaResult {
            objective: problem.objective_unchecked(&x),
            x,
            iterations: 0,
            lipschitz,
        });
    }
    let qtb = q.t().dot(problem.b());
    let step = 1.0 / lipschitz;
    let mut x = Vector::zeros(d);
    for it in 1..=cap {
        let grad = q.t().dot(&q.dot(&x)) - &qtb;
        let next = soft_threshold(&(&x - &(step * &grad)), problem.lambda() * step);
        let moved = (&next - &x).mapv(|v| v * v).sum().sqrt();
        x = next;
        if !moved.is_finite() {
            return Err(Error::NonFinite("ista iterate"));
        }
        if moved <= tol {
            return Ok(IstaResult {
                objective: problem.objective_unchecked(&x),
                x,
                iterations: it,
                lipschitz,
            });
        }
    }
    Err(Error::IterationCap {
        solver: "ista",
        cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FStarEstimate {
    pub f_star: f64,
    pub ista: f64,
    pub splitting: f64,
    pub splitting_iterations: usize,
}

/// Smaller of a long splitting run (at least `10⁴` iterations) and ISTA at
/// `1e-10`.
pub fn estimate_f_star(problem: &LassoProblem, config: &SolverConfig, budget: usize) -> Result<FStarEstimate> {
    let ista = ista_oracle(problem, 1e-10, 1_000_000)?;
    let split = problem.splitting(CgCap::default())?;
    let config = SolverConfig {
        max_outer: budget.max(10_000),
        termination: Termination { residual_tol: None },
        ..config.clone()
    };
    let mut monitor = ObjectiveStop {
        problem,
        f_star: None,
        tol: 0.0,
    };
    let run = solve(&split, &config, None, Some(&mut monitor))?;
    if let Status::Failed { block, steps, defect, allowed } = run.status {
        return Err(Error::Resolvent {
            block,
            steps,
            defect,
            allowed,
        });
    }
    let best = run
        .trace
        .records()
        .iter()
        .filter_map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    let at_primal = problem.objective_unchecked(run.primal());
    let splitting = best.min(at_primal);
    Ok(FStarEstimate {
        f_star: ista.objective.min(splitting),
        ista: ista.objective,
        splitting,
        splitting_iterations: run.iterations(),
    })
}

/// Shape and seed of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub m: usize,
    pub d: usize,
    pub r: usize,
    pub seed: u64,
}

/// Provenance of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub seed: u64,
    pub m: usize,
    pub d: usize,
    pub r: usize,
    pub lambda: f64,
    pub partition_sizes: Vec<usize>,
}

/// Standard normal `Q` (row-major fill) and `b_j ∈ {0, 1}` with equal
/// probability, both from one seeded stream.
pub fn random_instance(spec: RandomSpec) -> Result<(LassoProblem, Manifest)> {
    let RandomSpec { m, d, r, seed } = spec;
    if d == 0 || r == 0 || m < r {
        return Err(Error::Config(format!("invalid shape m={m}, d={d}, r={r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = Array2::from_shape_simple_fn((m, d), || rng.sample::<f64, _>(StandardNormal));
    let b = Vector::from_shape_simple_fn(m, || if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let problem = LassoProblem::with_blocks(q, b, r)?;
    let manifest = Manifest {
        generator: GENERATOR.into(),
        seed,
        m,
        d,
        r,
        lambda: problem.lambda(),
        partition_sizes: problem.partition_sizes(),
    };
    Ok((problem, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
    pub status: String,
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub f_star: f64,
    pub variant_a: VariantOutcome,
    pub variant_b: VariantOutcome,
    /// `iterations_b / iterations_a`.
    pub iteration_ratio: f64,
    pub time_ratio: f64,
}

/// Outer iterations and runtimes of two variants on the same instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tolerance: f64,
    pub rows: Vec<ComparisonRow>,
    pub excluded: Vec<String>,
    pub geomean_iterations_a: f64,
    pub geomean_iterations_b: f64,
    pub geomean_iteration_ratio: f64,
    pub geomean_time_ratio: f64,
}

fn geomean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v.ln(), n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).exp()
    }
}

fn run_variant(
    problem: &LassoProblem,
    split: &SplittingProblem,
    config: &SolverConfig,
    f_star: f64,
    tol: f64,
) -> Result<(SolveResult, f64)> {
    let config = SolverConfig {
        termination: Termination { residual_tol: None },
        ..config.clone()
    };
    let mut monitor = ObjectiveStop {
        problem,
        f_star: Some(f_star),
        tol,
    };
    let start = Instant::now();
    let res = solve(split, &config, None, Some(&mut monitor))?;
    Ok((res, start.elapsed().as_secs_f64()))
}

fn outcome(res: &SolveResult, seconds: f64) -> VariantOutcome {
    VariantOutcome {
        iterations: res.iterations(),
        seconds,
        converged: res.status == Status::Converged,
        status: format!("{:?}", res.status),
        final_objective: res.trace.last().and_then(|r| r.objective).unwrap_or(f64::NAN),
    }
}

/// Solves each named instance with both variants to the same objective
/// tolerance. `F*` comes from ISTA at `1e-10`; wall time covers the outer
/// loop only.
pub fn run_comparison(
    instances: &[(String, LassoProblem)],
    variant_a: &SolverConfig,
    variant_b: &SolverConfig,
    tol: f64,
) -> Result<ComparisonReport> {
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (name, problem) in instances {
        let f_star = ista_oracle(problem, 1e-10, 1_000_000)?.objective;
        let split = problem.splitting(CgCap::default())?;
        let (ra, ta) = run_variant(problem, &split, variant_a, f_star, tol)?;
        let (rb, tb) = run_variant(problem, &split, variant_b, f_star, tol)?;
        let (a, b) = (outcome(&ra, ta), outcome(&rb, tb));
        if !(a.converged && b.converged) {
            excluded.push(format!("{name}: variant A {}, variant B {}", a.status, b.status));
            continue;
        }
        rows.push(ComparisonRow {
            name: name.clone(),
            f_star,
            iteration_ratio: b.iterations as f64 / a.iterations as f64,
            time_ratio: b.seconds / a.seconds,
            variant_a: a,
            variant_b: b,
        });
    }
    Ok(ComparisonReport {
        tolerance: tol,
        geomean_iterations_a: geomean(rows.iter().map(|r| r.variant_a.iterations as f64)),
        geomean_iterations_b: geomean(rows.iter().map(|r| r.variant_b.iterations as f64)),
        geomean_iteration_ratio: geomean(rows.iter().map(|r| r.iteration_ratio)),
        geomean_time_ratio: geomean(rows.iter().map(|r| r.time_ratio)),
        rows,
        excluded,
    })
}

impl ComparisonReport {
    /// Plain-text table: problem, both iteration counts, ratio, then the
    /// geometric-mean row and a runtime block.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(14);
        out.push_str(&format!("{:<w$}  {:>10}  {:>10}  {:>7}\n", "Problem", "A", "B", "B/A"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<w$}  {:>10}  {:>10}  {:>7.4}\n",
                r.name, r.variant_a.iterations, r.variant_b.iterations, r.iteration_ratio
            ));
        }
        out.push_str(&format!(
            "{:<w$}  {:>10.1}  {:>10.1}  {:>7.4}\n",
            "Geometric mean", self.geomean_iterations_a, self.geomean_iterations_b, self.geomean_iteration_ratio
        ));
        out.push('\n');
        out.push_str(&format!("{:<w$}  {:>10}  {:>10}  {:>7}\n", "Runtime (s)", "A", "B", "B/A"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<w$}  {:>10.4}  {:>10.4}  {:>7.4}\n",
                r.name, r.variant_a.seconds, r.variant_b.seconds, r.time_ratio
            ));
        }
        out.push_str(&format!(
            "{:<w$}  {:>10}  {:>10}  {:>7.4}\n",
            "Geometric mean", "", "", self.geomean_time_ratio
        ));
        for e in &self.excluded {
            out.push_str(&format!("excluded: {e}\n"));
        }
        out
    }
}
