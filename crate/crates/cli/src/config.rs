//! Solver settings layered as defaults < TOML file < flags.

use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use projsplit::params::InertiaRelaxationBudget;
use projsplit::solver::{Stepsizes, Termination};
use projsplit::{beta_from_alpha, AlphaSchedule, BetaSchedule, SolverConfig};
use serde::Deserialize;

/// Every field optional; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Inertia α (constant schedule).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Inertia bound ᾱ; fixes β̄ = β̄(ᾱ).
    #[arg(long)]
    pub alpha_bar: Option<f64>,
    /// Relaxation β (default β̄(ᾱ)).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Relative-error tolerance σ in [0, 1).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Resolvent stepsize ρ, shared by all blocks.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Residual tolerance; 0 disables the residual rule.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Stop on |F - F*| / F* <= this, with F* from the ISTA oracle.
    #[arg(long)]
    pub objective_tol: Option<f64>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `other` wins wherever it is set.
    pub fn layer(self, other: &Overrides) -> Overrides {
        Overrides {
            alpha: other.alpha.or(self.alpha),
            alpha_bar: other.alpha_bar.or(self.alpha_bar),
            beta: other.beta.or(self.beta),
            sigma: other.sigma.or(self.sigma),
            gamma: other.gamma.or(self.gamma),
            rho: other.rho.or(self.rho),
            tol: other.tol.or(self.tol),
            max_outer: other.max_outer.or(self.max_outer),
            objective_tol: other.objective_tol.or(self.objective_tol),
        }
    }

    pub fn resolve(&self) -> Result<SolverConfig> {
        let base = SolverConfig::default();
        let alpha = self.alpha.unwrap_or(0.1);
        let alpha_bar = self.alpha_bar.unwrap_or(base.budget.alpha_bar());
        let beta_bar = beta_from_alpha(alpha_bar)?;
        let beta = self.beta.unwrap_or(beta_bar);
        let budget = InertiaRelaxationBudget::with_beta_lo(alpha_bar, alpha, beta.clamp(f64::MIN_POSITIVE, beta_bar))?;
        let residual_tol = match self.tol {
            Some(0.0) => None,
            Some(t) => Some(t),
            None => base.termination.residual_tol,
        };
        let config = SolverConfig {
            budget,
            alpha: AlphaSchedule::Constant(alpha),
            beta: BetaSchedule::Constant(beta),
            sigma: self.sigma.unwrap_or(base.sigma),
            gamma: self.gamma.unwrap_or(base.gamma),
            rho: self.rho.map_or(base.rho, Stepsizes::Uniform),
            max_outer: self.max_outer.unwrap_or(base.max_outer),
            termination: Termination { residual_tol },
            ..base
        };
        config.validate(1)?;
        Ok(config)
    }
}

pub fn load(file: Option<&Path>, flags: &Overrides) -> Result<Overrides> {
    let from_file = match file {
        Some(p) => Overrides::from_file(p)?,
        None => Overrides::default(),
    };
    Ok(from_file.layer(flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library() {
        let c = Overrides::default().resolve().unwrap();
        assert_eq!(c, SolverConfig::default());
    }

    #[test]
    fn flags_beat_file() {
        let file: Overrides = toml::from_str("alpha = 0.05\nsigma = 0.5\n").unwrap();
        let flags = Overrides {
            alpha: Some(0.02),
            ..Overrides::default()
        };
        let merged = file.layer(&flags);
        assert_eq!(merged.alpha, Some(0.02));
        assert_eq!(merged.sigma, Some(0.5));
    }

    #[test]
    fn rejects_infeasible() {
        let bad = Overrides {
            alpha: Some(0.2),
            ..Overrides::default()
        };
        assert!(bad.resolve().is_err());
        let too_much = Overrides {
            beta: Some(1.9),
            ..Overrides::default()
        };
        assert!(too_much.resolve().is_err());
        assert!(toml::from_str::<Overrides>("alpah = 0.1").is_err());
    }
}
