//! Labelled dictionaries and minimal-residual classification.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::GroupPartition;
use crate::solvers::{admm_solve, lipschitz_estimate, Decomposition, SolverConfig};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    #[default]
    UnitL2Columns,
}

/// Where one dictionary atom came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSource {
    pub class: usize,
    pub unit: String,
    /// Column of the training unit this atom was taken from.
    pub frame: usize,
}

/// A training unit (one column per frame) with its class label.
#[derive(Debug, Clone)]
pub struct LabeledUnit {
    pub label: String,
    pub id: String,
    pub matrix: Matrix,
}

/// `d x n` atoms grouped by class. Immutable once built; the Gram matrix
/// and its Lipschitz bound are computed on first use and shared.
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: Matrix,
    partition: GroupPartition,
    normalization: Normalization,
    provenance: Vec<AtomSource>,
    gram: OnceLock<(Matrix, f64)>,
}

impl Dictionary {
    pub fn new(
        atoms: Matrix,
        partition: GroupPartition,
        normalization: Normalization,
        provenance: Vec<AtomSource>,
    ) -> Result<Self> {
        let n = atoms.ncols();
        if partition.n() != n {
            return Err(Error::input(format!(
                "partition covers {} atoms, dictionary has {n}",
                partition.n()
            )));
        }
        if provenance.len() != n {
            return Err(Error::input(format!(
                "{} provenance records for {n} atoms",
                provenance.len()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("dictionary has non-finite entries"));
        }
        for (j, col) in atoms.column_iter().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::input(format!("atom {j} is all zeros")));
            }
            if normalization == Normalization::UnitL2Columns && (norm - 1.0).abs() > 1e-9 {
                return Err(Error::input(format!(
                    "atom {j} has norm {norm}, expected unit columns"
                )));
            }
        }
        Ok(Dictionary {
            atoms,
            partition,
            normalization,
            provenance,
            gram: OnceLock::new(),
        })
    }

    /// Wraps a bare matrix with the given contiguous class sizes.
    pub fn from_parts(
        atoms: Matrix,
        sizes: &[usize],
        labels: Vec<String>,
        normalization: Normalization,
    ) -> Result<Self> {
        let partition = GroupPartition::from_sizes(sizes, labels)?;
        let owner = partition.membership();
        let mut frame = vec![0usize; partition.len()];
        let provenance = owner
            .into_iter()
            .map(|class| {
                let f = frame[class];
                frame[class] += 1;
                AtomSource {
                    class,
                    unit: String::new(),
                    frame: f,
                }
            })
            .collect();
        Dictionary::new(atoms, partition, normalization, provenance)
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn provenance(&self) -> &[AtomSource] {
        &self.provenance
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Atom count `n`.
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.partition.len()
    }

    pub fn labels(&self) -> &[String] {
        self.partition.labels()
    }

    fn gram_cache(&self) -> &(Matrix, f64) {
        self.gram.get_or_init(|| {
            let gram = self.atoms.tr_mul(&self.atoms);
            let lip = lipschitz_estimate(&gram);
            (gram, lip)
        })
    }

    /// `D^T D`.
    pub fn gram(&self) -> &Matrix {
        &self.gram_cache().0
    }

    /// Step constant of the inner solvers, `>= lambda_max(D^T D)`.
    pub fn lipschitz(&self) -> f64 {
        self.gram_cache().1
    }

    /// `D_[G_c] X_[G_c]`.
    pub fn class_reconstruction(&self, class: usize, x: &Matrix) -> Matrix {
        let rows = self.partition.group(class);
        let mut out = Matrix::zeros(self.dim(), x.ncols());
        for &i in rows {
            for (t, &coef) in x.row(i).iter().enumerate() {
                if coef != 0.0 {
                    out.column_mut(t).axpy(coef, &self.atoms.column(i), 1.0);
                }
            }
        }
        out
    }
}

/// Concatenates training units class by class (classes in ascending label
/// order, units and frames in the order given) and optionally rescales
/// every atom to unit length.
pub fn build_dictionary(units: &[LabeledUnit], normalization: Normalization) -> Result<Dictionary> {
    let first = units
        .first()
        .ok_or_else(|| Error::input("no training units"))?;
    let d = first.matrix.nrows();
    if let Some(bad) = units.iter().find(|u| u.matrix.nrows() != d) {
        return Err(Error::input(format!(
            "unit {:?} has dimension {}, expected {d}",
            bad.id,
            bad.matrix.nrows()
        )));
    }

    let mut labels: Vec<String> = units.iter().map(|u| u.label.clone()).collect();
    labels.sort();
    labels.dedup();

    let mut columns = Vec::new();
    let mut provenance = Vec::new();
    let mut sizes = Vec::with_capacity(labels.len());
    for (class, label) in labels.iter().enumerate() {
        let before = columns.len();
        for unit in units.iter().filter(|u| &u.label == label) {
            for (frame, col) in unit.matrix.column_iter().enumerate() {
                columns.push(col.clone_owned());
                provenance.push(AtomSource {
                    class,
                    unit: unit.id.clone(),
                    frame,
                });
            }
        }
        let size = columns.len() - before;
        if size == 0 {
            return Err(Error::input(format!(
                "class {label:?} contributes no atoms"
            )));
        }
        sizes.push(size);
    }

    let mut atoms = Matrix::from_columns(&columns);
    for (j, mut col) in atoms.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            let src = &provenance[j];
            return Err(Error::input(format!(
                "atom from unit {:?} frame {} is all zeros",
                src.unit, src.frame
            )));
        }
        if normalization == Normalization::UnitL2Columns {
            col /= norm;
        }
    }
    let partition = GroupPartition::from_sizes(&sizes, labels)?;
    Dictionary::new(atoms, partition, normalization, provenance)
}

#[derive(Debug, Clone)]
pub struct ClassificationResult {
    /// `r_c = ||Y - D_[G_c] X_[G_c] - L||_F`, one per class.
    pub residuals: Vec<f64>,
    pub predicted: usize,
    /// Second-smallest minus smallest residual; `None` with a single class.
    pub margin: Option<f64>,
    pub decomposition: Decomposition,
}

/// Per-class residuals of a stored decomposition.
pub fn class_residuals(y: &Matrix, dict: &Dictionary, dec: &Decomposition) -> Result<Vec<f64>> {
    let (d, tau) = y.shape();
    if dict.dim() != d || dec.l.shape() != (d, tau) || dec.x.shape() != (dict.len(), tau) {
        return Err(Error::param(format!(
            "decomposition shapes X {:?}, L {:?} do not match Y {:?} and {} atoms",
            dec.x.shape(),
            dec.l.shape(),
            y.shape(),
            dict.len()
        )));
    }
    let base = y - &dec.l;
    Ok((0..dict.num_classes())
        .map(|c| (&base - dict.class_reconstruction(c, &dec.x)).norm())
        .collect())
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] <= v => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn classify(y: &Matrix, dict: &Dictionary, cfg: &SolverConfig) -> Result<ClassificationResult> {
    let decomposition = admm_solve(y, dict, cfg)?;
    let residuals = class_residuals(y, dict, &decomposition)?;
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("non-finite class residual".into()));
    }
    let predicted = argmin_first(&residuals).expect("at least one class");
    let margin = residuals
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != predicted)
        .map(|(_, &r)| r)
        .min_by(f64::total_cmp)
        .map(|second| second - residuals[predicted]);
    Ok(ClassificationResult {
        residuals,
        predicted,
        margin,
        decomposition,
    })
}
