//! Admissible inertia / relaxation parameters.
//!
//! The relaxation upper bound is tied to the inertia upper bound `ᾱ` by
//!
//! ```text
//! β̄(ᾱ) = 2(ᾱ-1)² / (2(ᾱ-1)² + 3ᾱ - 1)
//! ```
//!
//! and convergence requires a nondecreasing schedule
//! `0 <= α_k <= α_{k+1} <= α < ᾱ < 1` with `β_k ∈ [β̲, β̄]`.

use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};

/// Upper bound on the relaxation parameter admitted by the inertia bound `ᾱ`.
pub fn beta_from_alpha(alpha_bar: f64) -> Result<f64> {
    check_domain("alpha_bar", alpha_bar, "(0, 1)", alpha_bar > 0.0 && alpha_bar < 1.0)?;
    let a = (alpha_bar - 1.0) * (alpha_bar - 1.0);
    Ok(2.0 * a / (2.0 * a + 3.0 * alpha_bar - 1.0))
}

/// Inverse of [`beta_from_alpha`].
pub fn alpha_from_beta(beta_bar: f64) -> Result<f64> {
    check_domain("beta_bar", beta_bar, "(0, 2)", beta_bar > 0.0 && beta_bar < 2.0)?;
    let b = beta_bar;
    Ok(2.0 * (2.0 - b) / (4.0 - b + (16.0 * b - 7.0 * b * b).sqrt()))
}

/// `q(ν) = 2(β̄⁻¹-1)ν² - (4β̄⁻¹-1)ν + 2β̄⁻¹-1`.
///
/// Its smallest positive root is `alpha_from_beta(β̄)`, and it is positive and
/// decreasing on `[0, root)`.
pub fn q_value(nu: f64, beta_bar: f64) -> Result<f64> {
    check_domain("beta_bar", beta_bar, "(0, 2)", beta_bar > 0.0 && beta_bar < 2.0)?;
    let inv = 1.0 / beta_bar;
    Ok(2.0 * (inv - 1.0) * nu * nu - (4.0 * inv - 1.0) * nu + 2.0 * inv - 1.0)
}

/// Root `2c / (b + sqrt(b² - 4ac))` of `aν² - bν + c`; requires `b, c > 0` and a
/// positive discriminant.
pub fn smallest_positive_root(a: f64, b: f64, c: f64) -> Result<f64> {
    check_domain("b", b, "(0, inf)", b > 0.0)?;
    check_domain("c", c, "(0, inf)", c > 0.0)?;
    let disc = b * b - 4.0 * a * c;
    check_domain("b^2 - 4ac", disc, "(0, inf)", disc > 0.0)?;
    Ok(2.0 * c / (b + disc.sqrt()))
}

/// Bounds on inertia and relaxation for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaRelaxationBudget {
    alpha_bar: f64,
    alpha_cap: f64,
    beta_bar: f64,
    beta_lo: f64,
}

impl InertiaRelaxationBudget {
    /// Budget with `β̲ = β̄`, i.e. a constant relaxation parameter.
    pub fn new(alpha_bar: f64, alpha_cap: f64) -> Result<Self> {
        let beta_bar = beta_from_alpha(alpha_bar)?;
        Self::with_beta_lo(alpha_bar, alpha_cap, beta_bar)
    }

    pub fn with_beta_lo(alpha_bar: f64, alpha_cap: f64, beta_lo: f64) -> Result<Self> {
        let beta_bar = beta_from_alpha(alpha_bar)?;
        check_domain(
            "alpha_cap",
            alpha_cap,
            "[0, alpha_bar)",
            alpha_cap >= 0.0 && alpha_cap < alpha_bar,
        )?;
        check_domain(
            "beta_lo",
            beta_lo,
            "(0, beta_bar]",
            beta_lo > 0.0 && beta_lo <= beta_bar,
        )?;
        Ok(Self {
            alpha_bar,
            alpha_cap,
            beta_bar,
            beta_lo,
        })
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }
    pub fn alpha_cap(&self) -> f64 {
        self.alpha_cap
    }
    pub fn beta_bar(&self) -> f64 {
        self.beta_bar
    }
    pub fn beta_lo(&self) -> f64 {
        self.beta_lo
    }

    /// `q(α)` for the cap α; strictly positive for a valid budget.
    pub fn q_at_cap(&self) -> f64 {
        q_value(self.alpha_cap, self.beta_bar).expect("beta_bar validated at construction")
    }

    pub fn check_beta(&self, beta: f64) -> Result<()> {
        check_domain(
            "beta_k",
            beta,
            "[beta_lo, beta_bar]",
            beta >= self.beta_lo && beta <= self.beta_bar,
        )
    }
}

/// First place where an inertia schedule leaves the admissible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleViolation {
    Negative { index: usize, value: f64 },
    Decreasing { index: usize, value: f64, previous: f64 },
    AboveCap { index: usize, value: f64, cap: f64 },
}

impl ScheduleViolation {
    pub fn index(&self) -> usize {
        match *self {
            Self::Negative { index, .. }
            | Self::Decreasing { index, .. }
            | Self::AboveCap { index, .. } => index,
        }
    }
}

impl std::fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Self::Negative { index, value } => write!(f, "alpha[{index}] = {value} is negative"),
            Self::Decreasing {
                index,
                value,
                previous,
            } => write!(f, "alpha[{index}] = {value} < alpha[{}] = {previous}", index - 1),
            Self::AboveCap { index, value, cap } => {
                write!(f, "alpha[{index}] = {value} exceeds the cap {cap}")
            }
        }
    }
}

/// Checks `0 <= α_k <= α_{k+1} <= α` on the given prefix.
pub fn validate_schedule(
    alphas: &[f64],
    budget: &InertiaRelaxationBudget,
) -> std::result::Result<(), ScheduleViolation> {
    let mut previous = 0.0;
    for (index, &value) in alphas.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(ScheduleViolation::Negative { index, value });
        }
        if index > 0 && value < previous {
            return Err(ScheduleViolation::Decreasing {
                index,
                value,
                previous,
            });
        }
        if value > budget.alpha_cap {
            return Err(ScheduleViolation::AboveCap {
                index,
                value,
                cap: budget.alpha_cap,
            });
        }
        previous = value;
    }
    Ok(())
}

impl From<ScheduleViolation> for Error {
    fn from(v: ScheduleViolation) -> Self {
        Error::Config(format!("inertia schedule: {v}"))
    }
}

/// Rule producing `α_k`. A finite sequence holds its last value afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    Constant(f64),
    Sequence(Vec<f64>),
}

impl AlphaSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Self::Constant(a) => *a,
            Self::Sequence(v) => v.get(k).or(v.last()).copied().unwrap_or(0.0),
        }
    }

    /// Validates the whole schedule; a finite sequence is checked in full,
    /// since its tail is constant.
    pub fn validate(&self, budget: &InertiaRelaxationBudget) -> std::result::Result<(), ScheduleViolation> {
        match self {
            Self::Constant(a) => validate_schedule(&[*a], budget),
            Self::Sequence(v) => validate_schedule(v, budget),
        }
    }
}

/// Rule producing `β_k ∈ [β̲, β̄]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    Constant(f64),
    Sequence(Vec<f64>),
}

impl BetaSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Self::Constant(b) => *b,
            Self::Sequence(v) => v.get(k).or(v.last()).copied().unwrap_or(1.0),
        }
    }

    pub fn validate(&self, budget: &InertiaRelaxationBudget) -> Result<()> {
        match self {
            Self::Constant(b) => budget.check_beta(*b),
            Self::Sequence(v) if v.is_empty() => Err(Error::Config("empty beta schedule".into())),
            Self::Sequence(v) => v.iter().try_for_each(|&b| budget.check_beta(b)),
        }
    }
}
