//! ADMM for the sparse + low-rank models and the proximal-gradient inner
//! solvers used for the coefficient step.

mod admm;
mod inner;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

pub use admm::{admm_solve, Admm, Decomposition, IterationRecord};
pub use inner::{
    lasso_objective, lasso_solve, lasso_solve_with, lipschitz_estimate, xstep_chislr, InnerOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `||X||_1 + lambda_L ||L||_*`
    Slr,
    /// `||X||_1 + lambda_L ||L||_* + lambda_G sum_G ||X_G||_F`
    Chislr,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slr" => Ok(Model::Slr),
            "chislr" | "c-hislr" => Ok(Model::Chislr),
            other => Err(Error::param(format!("unknown model {other:?}"))),
        }
    }
}

/// Step size policy of the proximal-gradient inner solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Constant step `1 / L_D`.
    Fixed,
    /// Start at `8 / L_D` and halve until the quadratic upper bound holds.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub model: Model,
    pub lambda_l: f64,
    /// Ignored by [`Model::Slr`].
    pub lambda_g: f64,
    /// ADMM penalty. `None` picks `1.25 / ||Y||_2` for each signal.
    pub beta: Option<f64>,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Stop once `||Y - DX - L||_F <= feas_tol * ||Y||_F`. Zero runs the
    /// whole outer budget.
    pub feas_tol: f64,
    pub step_rule: StepRule,
    /// Largest `min(d, tau)` the SVD is allowed to handle.
    pub svd_max_dim: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            model: Model::Chislr,
            lambda_l: 10.0,
            lambda_g: 4.5,
            beta: None,
            outer_iters: 600,
            inner_iters: 10,
            feas_tol: 0.0,
            step_rule: StepRule::Fixed,
            svd_max_dim: crate::prox::DEFAULT_SVD_MAX_DIM,
        }
    }
}

impl SolverConfig {
    pub fn slr() -> Self {
        SolverConfig {
            model: Model::Slr,
            lambda_g: 0.0,
            ..SolverConfig::default()
        }
    }

    pub fn chislr() -> Self {
        SolverConfig::default()
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        nonneg("lambda_l", self.lambda_l)?;
        nonneg("lambda_g", self.lambda_g)?;
        nonneg("feas_tol", self.feas_tol)?;
        if let Some(beta) = self.beta {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::param(format!("beta must be positive, got {beta}")));
            }
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::param("iteration limits must be positive"));
        }
        if self.svd_max_dim == 0 {
            return Err(Error::param("svd_max_dim must be positive"));
        }
        Ok(())
    }

    /// Group weight actually applied by the model.
    pub fn effective_lambda_g(&self) -> f64 {
        match self.model {
            Model::Slr => 0.0,
            Model::Chislr => self.lambda_g,
        }
    }

    /// The configured penalty, or the default scaled to `y`.
    pub fn resolve_beta(&self, y: &Matrix) -> f64 {
        self.beta.unwrap_or_else(|| default_beta(y))
    }

    pub(crate) fn inner_options(&self) -> InnerOptions {
        InnerOptions {
            iters: self.inner_iters,
            step_rule: self.step_rule,
        }
    }
}

/// `1.25 / ||Y||_2`, or `1.25` for a zero signal.
pub fn default_beta(y: &Matrix) -> f64 {
    let spectral = if y.is_empty() {
        0.0
    } else {
        y.clone().singular_values().max()
    };
    if spectral > 0.0 && spectral.is_finite() {
        1.25 / spectral
    } else {
        1.25
    }
}
