//! Reference computations for the oracle tests. Nothing here calls into the
//! library's numerical paths.
#![allow(dead_code)]

use hislr::{GroupPartition, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// One-sided Jacobi SVD. Returns `(U, s, V)` with `A = U diag(s) V^T`,
/// `U` having `min(rows, cols)` orthonormal columns (zero columns where
/// `s` vanishes).
pub fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|x| x * x).sum();
                let beta: f64 = w.column(q).iter().map(|x| x * x).sum();
                let gamma: f64 = w
                    .column(p)
                    .iter()
                    .zip(w.column(q).iter())
                    .map(|(x, y)| x * y)
                    .sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for i in 0..m.nrows() {
                        let (xp, xq) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = c * xp - s * xq;
                        m[(i, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut u = Matrix::zeros(a.nrows(), n);
    let mut s = vec![0.0; n];
    for j in 0..n {
        let norm: f64 = w.column(j).iter().map(|x| x * x).sum::<f64>().sqrt();
        s[j] = norm;
        if norm > 0.0 {
            for i in 0..a.nrows() {
                u[(i, j)] = w[(i, j)] / norm;
            }
        }
    }
    (u, s, v)
}

/// Full SVD, shrink, reconstruct.
pub fn svt_oracle(a: &Matrix, t: f64) -> Matrix {
    let (u, s, v) = jacobi_svd(a);
    let mut out = Matrix::zeros(a.nrows(), a.ncols());
    for (k, &sk) in s.iter().enumerate() {
        let shrunk = (sk - t).max(0.0);
        if shrunk == 0.0 {
            continue;
        }
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                out[(i, j)] += shrunk * u[(i, k)] * v[(j, k)];
            }
        }
    }
    out
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Cyclic coordinate descent for `1/2 ||B - D X||^2 + lam ||X||_1`, column
/// by column, until no coordinate moves by more than `1e-15`.
pub fn cd_lasso(d: &Matrix, b: &Matrix, lam: f64) -> Matrix {
    let (rows, n) = d.shape();
    let col_sq: Vec<f64> = (0..n)
        .map(|j| (0..rows).map(|i| d[(i, j)] * d[(i, j)]).sum())
        .collect();
    let mut x = Matrix::zeros(n, b.ncols());
    for t in 0..b.ncols() {
        let mut r: Vec<f64> = (0..rows).map(|i| b[(i, t)]).collect();
        for _sweep in 0..1_000_000 {
            let mut moved = 0.0f64;
            for j in 0..n {
                if col_sq[j] == 0.0 {
                    continue;
                }
                let old = x[(j, t)];
                let rho: f64 = (0..rows).map(|i| d[(i, j)] * r[i]).sum::<f64>() + col_sq[j] * old;
                let new = soft(rho, lam) / col_sq[j];
                if new != old {
                    for i in 0..rows {
                        r[i] -= d[(i, j)] * (new - old);
                    }
                    x[(j, t)] = new;
                    moved = moved.max((new - old).abs());
                }
            }
            if moved <= 1e-15 {
                break;
            }
        }
    }
    x
}

pub fn lasso_value(d: &Matrix, b: &Matrix, x: &Matrix, lam: f64) -> f64 {
    let mut fit = 0.0;
    for t in 0..b.ncols() {
        for i in 0..d.nrows() {
            let pred: f64 = (0..d.ncols()).map(|j| d[(i, j)] * x[(j, t)]).sum();
            fit += (b[(i, t)] - pred).powi(2);
        }
    }
    0.5 * fit + lam * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// `1/2 ||Z - V||^2 + t1 ||Z||_1 + t2 sum_G ||Z_G||_F`.
pub fn hier_objective(z: &Matrix, v: &Matrix, t1: f64, t2: f64, p: &GroupPartition) -> f64 {
    let fit: f64 = z.iter().zip(v.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let l1: f64 = z.iter().map(|a| a.abs()).sum();
    let groups: f64 = p
        .groups()
        .iter()
        .map(|rows| {
            rows.iter()
                .flat_map(|&i| (0..z.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| z[(i, j)].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    0.5 * fit + t1 * l1 + t2 * groups
}

/// Largest violation of the optimality conditions of `hier_objective` at `z`.
pub fn hier_subgradient_violation(
    z: &Matrix,
    v: &Matrix,
    t1: f64,
    t2: f64,
    p: &GroupPartition,
) -> f64 {
    let mut worst = 0.0f64;
    for rows in p.groups() {
        let norm = rows
            .iter()
            .flat_map(|&i| (0..z.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| z[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            // need some g with ||g||_F <= 1 and |v - t2 g| <= t1 entrywise
            let resid = rows
                .iter()
                .flat_map(|&i| (0..z.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| soft(v[(i, j)], t1).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(resid - t2);
            continue;
        }
        for &i in rows {
            for j in 0..z.ncols() {
                let zij = z[(i, j)];
                if zij != 0.0 {
                    let g = zij - v[(i, j)] + t1 * zij.signum() + t2 * zij / norm;
                    worst = worst.max(g.abs());
                } else {
                    worst = worst.max(v[(i, j)].abs() - t1);
                }
            }
        }
    }
    worst
}

/// Smallest objective among single- and double-coordinate `+-h`
/// perturbations of `z`, minus the objective at `z`.
pub fn grid_gap(z: &Matrix, v: &Matrix, t1: f64, t2: f64, p: &GroupPartition, h: f64) -> f64 {
    let base = hier_objective(z, v, t1, t2, p);
    let len = z.len();
    let mut best = f64::INFINITY;
    let mut probe = z.clone();
    for a in 0..len {
        for da in [-h, h] {
            probe[a] += da;
            best = best.min(hier_objective(&probe, v, t1, t2, p));
            for b in a + 1..len {
                for db in [-h, h] {
                    probe[b] += db;
                    best = best.min(hier_objective(&probe, v, t1, t2, p));
                    probe[b] -= db;
                }
            }
            probe[a] -= da;
        }
    }
    best - base
}

/// `||Y - D_G X_G - L||_F` for each class, by explicit loops.
pub fn residuals_by_hand(
    y: &Matrix,
    d: &Matrix,
    x: &Matrix,
    l: &Matrix,
    p: &GroupPartition,
) -> Vec<f64> {
    p.groups()
        .iter()
        .map(|rows| {
            let mut sq = 0.0;
            for i in 0..y.nrows() {
                for t in 0..y.ncols() {
                    let fit: f64 = rows.iter().map(|&j| d[(i, j)] * x[(j, t)]).sum();
                    sq += (y[(i, t)] - fit - l[(i, t)]).powi(2);
                }
            }
            sq.sqrt()
        })
        .collect()
}

pub fn l1_mass_in_group(x: &Matrix, rows: &[usize]) -> f64 {
    let total: f64 = x.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let inside: f64 = rows
        .iter()
        .map(|&i| x.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    inside / total
}
