use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dictionary;
use crate::prox::{svt_full, Threshold};
use crate::solvers::inner::{group_norm_sum, l1_norm, Penalty, ProxGradient};
use crate::solvers::{Model, SolverConfig};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based outer iteration.
    pub iteration: usize,
    /// `f(X) + lambda_L ||L||_*` at the new iterate.
    pub objective: f64,
    /// `||Y - D X - L||_F`.
    pub feasibility: f64,
    /// Numerical rank of `L`.
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Coefficients, `n x tau`.
    pub x: Matrix,
    /// Low-rank part, `d x tau`.
    pub l: Matrix,
    /// Multipliers, `d x tau`.
    pub multiplier: Matrix,
    /// The penalty the run used.
    pub beta: f64,
    pub history: Vec<IterationRecord>,
}

impl Decomposition {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn final_feasibility(&self) -> Option<f64> {
        self.history.last().map(|r| r.feasibility)
    }

    pub fn final_rank(&self) -> Option<usize> {
        self.history.last().map(|r| r.rank)
    }
}

/// Step-by-step ADMM on `min f(X) + lambda_L ||L||_*  s.t.  Y = D X + L`
/// using the augmented Lagrangian with `+<Lambda, Y - DX - L>`:
///
/// ```text
/// L     <- SVT_{lambda_L / beta}(Y - D X + Lambda / beta)
/// X     <- argmin f(X) + beta/2 ||Y - D X - L + Lambda / beta||_F^2   (inexact)
/// Lambda <- Lambda + beta (Y - D X - L)
/// ```
///
/// With `lambda_L = 0` the low-rank block is switched off (`L = 0`) and
/// each iteration continues the penalized least-squares fit of `Y` alone.
pub struct Admm<'a> {
    y: &'a Matrix,
    dict: &'a Dictionary,
    cfg: SolverConfig,
    beta: f64,
    y_norm: f64,
    x: Matrix,
    l: Matrix,
    multiplier: Matrix,
    dx: Matrix,
    history: Vec<IterationRecord>,
    done: bool,
}

impl<'a> Admm<'a> {
    pub fn new(y: &'a Matrix, dict: &'a Dictionary, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if y.nrows() != dict.dim() {
            return Err(Error::param(format!(
                "signal has {} rows but dictionary atoms have {}",
                y.nrows(),
                dict.dim()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::param("signal has no columns"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("signal has non-finite entries".into()));
        }
        let (d, tau) = y.shape();
        let n = dict.len();
        Ok(Admm {
            y,
            dict,
            cfg: cfg.clone(),
            beta: cfg.resolve_beta(y),
            y_norm: y.norm(),
            x: Matrix::zeros(n, tau),
            l: Matrix::zeros(d, tau),
            multiplier: Matrix::zeros(d, tau),
            dx: Matrix::zeros(d, tau),
            history: Vec::new(),
            done: false,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn multiplier(&self) -> &Matrix {
        &self.multiplier
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    /// True once the outer budget is spent or the feasibility tolerance met.
    pub fn is_done(&self) -> bool {
        self.done
    }

    fn penalty(&self) -> Penalty<'a> {
        let weight = 1.0 / self.beta;
        match self.cfg.model {
            Model::Slr => Penalty::L1 { weight },
            Model::Chislr => Penalty::Hierarchical {
                l1: weight,
                group: self.cfg.lambda_g * weight,
                partition: self.dict.partition(),
            },
        }
    }

    fn coefficient_cost(&self) -> f64 {
        let mut f = l1_norm(&self.x);
        if self.cfg.model == Model::Chislr && self.cfg.lambda_g > 0.0 {
            f += self.cfg.lambda_g * group_norm_sum(&self.x, self.dict.partition());
        }
        f
    }

    /// Runs one outer iteration and records it.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let iteration = self.history.len() + 1;
        let low_rank = self.cfg.lambda_l > 0.0;
        let scaled_multiplier = &self.multiplier / self.beta;

        let (nuclear, rank) = if low_rank {
            let arg = self.y - &self.dx + &scaled_multiplier;
            let t = Threshold::new(self.cfg.lambda_l / self.beta)?;
            let shrunk = svt_full(&arg, t, self.cfg.svd_max_dim).map_err(|e| match e {
                Error::Numeric(_) => Error::Divergence {
                    iteration,
                    what: "L-step argument",
                },
                other => other,
            })?;
            let summary = (shrunk.nuclear_norm(), shrunk.rank());
            self.l = shrunk.matrix;
            summary
        } else {
            (0.0, 0)
        };

        let target = if low_rank {
            self.y - &self.l + &scaled_multiplier
        } else {
            self.y.clone()
        };
        let solver = ProxGradient {
            gram: self.dict.gram(),
            lipschitz: self.dict.lipschitz(),
            options: self.cfg.inner_options(),
        };
        let x0 = std::mem::replace(&mut self.x, Matrix::zeros(0, 0));
        let diverged = Error::Divergence {
            iteration,
            what: "X",
        };
        self.x = match solver.minimize(x0, &self.dict.atoms().tr_mul(&target), &self.penalty()) {
            Ok(x) if x.iter().all(|v| v.is_finite()) => x,
            Ok(_) | Err(Error::Numeric(_)) => return Err(diverged),
            Err(e) => return Err(e),
        };
        self.dx = self.dict.atoms() * &self.x;

        let residual = self.y - &self.dx - &self.l;
        if low_rank {
            self.multiplier += &residual * self.beta;
            if self.multiplier.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    iteration,
                    what: "multiplier",
                });
            }
        }

        let record = IterationRecord {
            iteration,
            objective: self.coefficient_cost() + self.cfg.lambda_l * nuclear,
            feasibility: residual.norm(),
            rank,
        };
        self.history.push(record);
        if iteration >= self.cfg.outer_iters
            || (low_rank && record.feasibility <= self.cfg.feas_tol * self.y_norm)
        {
            self.done = true;
        }
        Ok(record)
    }

    pub fn run(mut self) -> Result<Decomposition> {
        while !self.done {
            self.step()?;
        }
        Ok(self.into_decomposition())
    }

    pub fn into_decomposition(self) -> Decomposition {
        Decomposition {
            x: self.x,
            l: self.l,
            multiplier: self.multiplier,
            beta: self.beta,
            history: self.history,
        }
    }
}

/// Solves the configured model for `y` over `dict`.
pub fn admm_solve(y: &Matrix, dict: &Dictionary, cfg: &SolverConfig) -> Result<Decomposition> {
    Admm::new(y, dict, cfg)?.run()
}
