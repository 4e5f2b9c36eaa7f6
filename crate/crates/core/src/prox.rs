//! Shrinkage operators: entrywise, per-group, hierarchical and spectral.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Largest `min(rows, cols)` accepted by [`svt`] unless overridden.
pub const DEFAULT_SVD_MAX_DIM: usize = 4096;

const SVD_MAX_ITERS: usize = 10_000;

/// A nonnegative shrinkage level.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub const ZERO: Threshold = Threshold(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::param(format!(
                "threshold must be nonnegative, got {value}"
            )));
        }
        Ok(Threshold(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Threshold {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Threshold::new(value)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

/// A non-overlapping, covering partition of `0..n` into labelled groups.
///
/// Group order is the class order used everywhere else (residual vectors,
/// confusion matrices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    labels: Vec<String>,
    n: usize,
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Self> {
        if groups.len() != labels.len() {
            return Err(Error::param(format!(
                "{} groups but {} labels",
                groups.len(),
                labels.len()
            )));
        }
        if groups.is_empty() {
            return Err(Error::param("partition has no groups"));
        }
        let n: usize = groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::param(format!("group {g} is empty")));
            }
            for &i in members {
                if i >= n || seen[i] {
                    return Err(Error::param(format!(
                        "group {g}: index {i} is out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(GroupPartition { groups, labels, n })
    }

    /// Contiguous groups of the given sizes, in order.
    pub fn from_sizes(sizes: &[usize], labels: Vec<String>) -> Result<Self> {
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (start..start + s).collect();
                start += s;
                g
            })
            .collect();
        GroupPartition::new(groups, labels)
    }

    /// Every index in its own group, labelled by position.
    pub fn singletons(n: usize) -> Result<Self> {
        GroupPartition::new(
            (0..n).map(|i| vec![i]).collect(),
            (0..n).map(|i| i.to_string()).collect(),
        )
    }

    /// Number of indices covered.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of groups.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn label(&self, g: usize) -> &str {
        &self.labels[g]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Group index of every covered index.
    pub fn membership(&self) -> Vec<usize> {
        let mut owner = vec![0; self.n];
        for (g, members) in self.groups.iter().enumerate() {
            for &i in members {
                owner[i] = g;
            }
        }
        owner
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.n {
            return Err(Error::param(format!(
                "partition covers {} indices but the matrix has {rows} rows",
                self.n
            )));
        }
        Ok(())
    }
}

/// `sign(v) * max(|v| - t, 0)`.
#[inline]
pub fn soft_threshold(v: f64, t: Threshold) -> f64 {
    let t = t.0;
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn soft_threshold_matrix(m: &Matrix, t: Threshold) -> Matrix {
    m.map(|v| soft_threshold(v, t))
}

pub(crate) fn soft_threshold_in_place(m: &mut Matrix, t: Threshold) {
    m.apply(|v| *v = soft_threshold(*v, t));
}

/// Scales the block by `max(1 - t / ||B||_F, 0)`; a block whose norm does
/// not exceed `t` (including a zero block) comes back as zeros.
pub fn group_soft_threshold(block: &Matrix, t: Threshold) -> Matrix {
    let norm = block.norm();
    if norm <= t.0 {
        return Matrix::zeros(block.nrows(), block.ncols());
    }
    block * (1.0 - t.0 / norm)
}

/// Proximal map of `t1 ||Z||_1 + t2 sum_G ||Z_G||_F`, where each group
/// selects a set of rows.
///
/// Soft-thresholding entrywise by `t1` and then shrinking every row-group
/// by `t2` is the exact minimizer for this nested pair of norms.
pub fn prox_hier(
    v: &Matrix,
    t1: Threshold,
    t2: Threshold,
    partition: &GroupPartition,
) -> Result<Matrix> {
    partition.check_rows(v.nrows())?;
    let mut z = v.clone();
    prox_hier_in_place(&mut z, t1, t2, partition);
    Ok(z)
}

pub(crate) fn prox_hier_in_place(
    z: &mut Matrix,
    t1: Threshold,
    t2: Threshold,
    partition: &GroupPartition,
) {
    soft_threshold_in_place(z, t1);
    if t2.0 == 0.0 {
        return;
    }
    for members in partition.groups() {
        let sq: f64 = members.iter().map(|&i| z.row(i).norm_squared()).sum();
        let norm = sq.sqrt();
        let scale = if norm <= t2.0 { 0.0 } else { 1.0 - t2.0 / norm };
        for &i in members {
            z.row_mut(i).scale_mut(scale);
        }
    }
}

/// Result of a singular value shrinkage.
#[derive(Debug, Clone)]
pub struct Shrunk {
    pub matrix: Matrix,
    /// The shrunk singular values `max(sigma_i - t, 0)`, in the order the
    /// decomposition produced them.
    pub singular_values: Vec<f64>,
}

impl Shrunk {
    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }

    /// Number of singular values above `1e-6 * sigma_max`.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }
}

/// Count of values exceeding `1e-6` times the largest one.
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > 1e-6 * max).count()
}

/// Singular value thresholding: `U max(S - t, 0) V^T`.
pub fn svt(m: &Matrix, t: Threshold) -> Result<Matrix> {
    svt_full(m, t, DEFAULT_SVD_MAX_DIM).map(|s| s.matrix)
}

/// [`svt`] that also reports the shrunk spectrum. Matrices with
/// `min(rows, cols) > max_dim` are rejected rather than approximated.
pub fn svt_full(m: &Matrix, t: Threshold, max_dim: usize) -> Result<Shrunk> {
    let (rows, cols) = m.shape();
    if rows.min(cols) > max_dim {
        return Err(Error::param(format!(
            "SVD of a {rows}x{cols} matrix exceeds the dimension cap {max_dim}"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SVD input has non-finite entries".into()));
    }
    if rows == 0 || cols == 0 {
        return Ok(Shrunk {
            matrix: m.clone(),
            singular_values: Vec::new(),
        });
    }
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let shrunk: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| (s - t.0).max(0.0))
        .collect();

    let mut out = Matrix::zeros(rows, cols);
    for (i, &s) in shrunk.iter().enumerate() {
        if s > 0.0 {
            out.ger(s, &u.column(i), &v_t.row(i).transpose(), 1.0);
        }
    }
    Ok(Shrunk {
        matrix: out,
        singular_values: shrunk,
    })
}
