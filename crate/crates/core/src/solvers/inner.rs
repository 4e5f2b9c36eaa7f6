use crate::error::{Error, Result};
use crate::model::Dictionary;
use crate::prox::{prox_hier_in_place, soft_threshold_in_place, GroupPartition, Threshold};
use crate::solvers::{Model, SolverConfig, StepRule};
use crate::Matrix;

const POWER_ITERS: usize = 100;
const LIPSCHITZ_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerOptions {
    pub iters: usize,
    pub step_rule: StepRule,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            iters: 100,
            step_rule: StepRule::Fixed,
        }
    }
}

/// Upper estimate of the largest eigenvalue of the Gram matrix `D^T D`:
/// a fixed-start power iteration, inflated by 1%.
pub fn lipschitz_estimate(gram: &Matrix) -> f64 {
    let n = gram.nrows();
    if n == 0 {
        return 1.0;
    }
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut rayleigh = 0.0;
    for _ in 0..POWER_ITERS {
        let w = gram * &v;
        rayleigh = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        v = w / norm;
    }
    if rayleigh > 0.0 && rayleigh.is_finite() {
        rayleigh * LIPSCHITZ_SAFETY
    } else {
        1.0
    }
}

/// Weighted nonsmooth term of an inner problem.
pub(crate) enum Penalty<'a> {
    L1 {
        weight: f64,
    },
    Hierarchical {
        l1: f64,
        group: f64,
        partition: &'a GroupPartition,
    },
}

impl Penalty<'_> {
    pub(crate) fn value(&self, x: &Matrix) -> f64 {
        match *self {
            Penalty::L1 { weight } => weight * l1_norm(x),
            Penalty::Hierarchical {
                l1,
                group,
                partition,
            } => l1 * l1_norm(x) + group * group_norm_sum(x, partition),
        }
    }

    fn prox(&self, z: &mut Matrix, step: f64) {
        match *self {
            Penalty::L1 { weight } => soft_threshold_in_place(z, threshold(step * weight)),
            Penalty::Hierarchical {
                l1,
                group,
                partition,
            } => prox_hier_in_place(z, threshold(step * l1), threshold(step * group), partition),
        }
    }
}

fn threshold(v: f64) -> Threshold {
    // Weights are validated nonnegative before any solve starts.
    Threshold::new(v).expect("nonnegative weight")
}

pub(crate) fn l1_norm(x: &Matrix) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn group_norm_sum(x: &Matrix, partition: &GroupPartition) -> f64 {
    partition
        .groups()
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|&i| x.row(i).norm_squared())
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Accelerated proximal gradient on `1/2 <X, G X> - <X, C> + penalty(X)`,
/// the expansion of `1/2 ||B - D X||_F^2` with `G = D^T D`, `C = D^T B`.
///
/// Momentum is dropped whenever a step would raise the objective, so the
/// accepted iterates are monotone.
pub(crate) struct ProxGradient<'a> {
    pub gram: &'a Matrix,
    pub lipschitz: f64,
    pub options: InnerOptions,
}

impl ProxGradient<'_> {
    /// Fails with [`Error::Numeric`] once the objective stops being finite.
    pub(crate) fn minimize(&self, x0: Matrix, c: &Matrix, penalty: &Penalty<'_>) -> Result<Matrix> {
        let smooth = |x: &Matrix, gx: &Matrix| 0.5 * x.dot(gx) - x.dot(c);

        let mut x = x0;
        let mut gx = self.gram * &x;
        let mut fx = smooth(&x, &gx) + penalty.value(&x);
        if !fx.is_finite() {
            return Err(non_finite());
        }
        let mut y = x.clone();
        let mut gy = gx.clone();
        let mut theta = 1.0_f64;
        let mut plain = true;
        let mut lip = match self.options.step_rule {
            StepRule::Fixed => self.lipschitz,
            StepRule::Backtracking => self.lipschitz / 8.0,
        };

        for _ in 0..self.options.iters {
            let grad = &gy - c;
            let (z, gz) = loop {
                let step = 1.0 / lip;
                let mut z = &y - &grad * step;
                penalty.prox(&mut z, step);
                let gz = self.gram * &z;
                if self.options.step_rule == StepRule::Backtracking && lip < self.lipschitz {
                    let diff = &z - &y;
                    let bound = smooth(&y, &gy) + grad.dot(&diff) + 0.5 * lip * diff.norm_squared();
                    if smooth(&z, &gz) > bound {
                        lip = (lip * 2.0).min(self.lipschitz);
                        continue;
                    }
                }
                break (z, gz);
            };

            let fz = smooth(&z, &gz) + penalty.value(&z);
            if !fz.is_finite() {
                return Err(non_finite());
            }
            if fz <= fx {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                let momentum = (theta - 1.0) / theta_next;
                y = &z + (&z - &x) * momentum;
                gy = &gz + (&gz - &gx) * momentum;
                x = z;
                gx = gz;
                fx = fz;
                theta = theta_next;
                plain = false;
            } else if plain {
                // A plain step from x no longer descends.
                break;
            } else {
                theta = 1.0;
                y.copy_from(&x);
                gy.copy_from(&gx);
                plain = true;
            }
        }
        Ok(x)
    }
}

fn non_finite() -> Error {
    Error::Numeric("inner objective is not finite".into())
}

/// `1/2 ||B - D X||_F^2 + lam ||X||_1`.
pub fn lasso_objective(d: &Matrix, b: &Matrix, x: &Matrix, lam: f64) -> f64 {
    0.5 * (b - d * x).norm_squared() + lam * l1_norm(x)
}

/// Column-wise Lasso from a zero start with the fixed step rule.
pub fn lasso_solve(d: &Matrix, b: &Matrix, lam: f64, iters: usize) -> Result<Matrix> {
    lasso_solve_with(
        d,
        b,
        lam,
        InnerOptions {
            iters,
            step_rule: StepRule::Fixed,
        },
        None,
    )
}

pub fn lasso_solve_with(
    d: &Matrix,
    b: &Matrix,
    lam: f64,
    options: InnerOptions,
    warm_start: Option<&Matrix>,
) -> Result<Matrix> {
    check_inner_inputs(d, b, warm_start, options)?;
    if !(lam.is_finite() && lam >= 0.0) {
        return Err(Error::param(format!(
            "lam must be finite and >= 0, got {lam}"
        )));
    }
    let gram = d.tr_mul(d);
    let solver = ProxGradient {
        gram: &gram,
        lipschitz: lipschitz_estimate(&gram),
        options,
    };
    let x0 = warm_start
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(d.ncols(), b.ncols()));
    solver.minimize(x0, &d.tr_mul(b), &Penalty::L1 { weight: lam })
}

/// One coefficient step of C-HiSLR: approximately minimizes
/// `f(X) + beta/2 ||T - D X||_F^2` for `f = ||X||_1 + lambda_G sum_G ||X_G||_F`,
/// starting from `x0`.
pub fn xstep_chislr(
    dict: &Dictionary,
    target: &Matrix,
    cfg: &SolverConfig,
    x0: &Matrix,
) -> Result<Matrix> {
    if cfg.model != Model::Chislr {
        return Err(Error::param("xstep_chislr requires the C-HiSLR model"));
    }
    cfg.validate()?;
    let options = cfg.inner_options();
    check_inner_inputs(dict.atoms(), target, Some(x0), options)?;
    let beta = cfg.resolve_beta(target);
    let solver = ProxGradient {
        gram: dict.gram(),
        lipschitz: dict.lipschitz(),
        options,
    };
    let penalty = Penalty::Hierarchical {
        l1: 1.0 / beta,
        group: cfg.lambda_g / beta,
        partition: dict.partition(),
    };
    solver.minimize(x0.clone(), &dict.atoms().tr_mul(target), &penalty)
}

fn check_inner_inputs(
    d: &Matrix,
    b: &Matrix,
    x0: Option<&Matrix>,
    options: InnerOptions,
) -> Result<()> {
    if d.nrows() != b.nrows() {
        return Err(Error::param(format!(
            "dictionary has {} rows but the target has {}",
            d.nrows(),
            b.nrows()
        )));
    }
    if let Some(x0) = x0 {
        if x0.shape() != (d.ncols(), b.ncols()) {
            return Err(Error::param(format!(
                "warm start is {:?}, expected {:?}",
                x0.shape(),
                (d.ncols(), b.ncols())
            )));
        }
    }
    if options.iters == 0 {
        return Err(Error::param("iteration count must be positive"));
    }
    Ok(())
}
