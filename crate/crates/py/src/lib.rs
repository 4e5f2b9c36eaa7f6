//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use hislr::data::{generate_synthetic as generate, SyntheticSpec};
use hislr::experiment::{report_to_json, run_experiment as run, ExperimentConfig};
use hislr::io::{read_dictionary, write_dictionary};
use hislr::solvers::lasso_solve;
use hislr::{
    build_dictionary, GroupPartition, LabeledUnit, Matrix, Model, Normalization, StepRule,
    Threshold,
};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = Vec<Vec<f64>>;

fn err(e: hislr::Error) -> PyErr {
    match e {
        hislr::Error::Numeric(_) | hislr::Error::Divergence { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        hislr::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &Rows) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn threshold(t: f64) -> PyResult<Threshold> {
    Threshold::new(t).map_err(err)
}

#[pyclass(name = "SolverConfig", from_py_object)]
#[derive(Clone)]
pub struct PySolverConfig {
    inner: hislr::SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (model="chislr", lambda_l=10.0, lambda_g=4.5, beta=None, outer_iters=600, inner_iters=10, feas_tol=0.0, backtracking=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        model: &str,
        lambda_l: f64,
        lambda_g: f64,
        beta: Option<f64>,
        outer_iters: usize,
        inner_iters: usize,
        feas_tol: f64,
        backtracking: bool,
    ) -> PyResult<Self> {
        let inner = hislr::SolverConfig {
            model: model.parse().map_err(err)?,
            lambda_l,
            lambda_g,
            beta,
            outer_iters,
            inner_iters,
            feas_tol,
            step_rule: if backtracking {
                StepRule::Backtracking
            } else {
                StepRule::Fixed
            },
            ..hislr::SolverConfig::default()
        };
        inner.validate().map_err(err)?;
        Ok(PySolverConfig { inner })
    }

    #[getter]
    fn model(&self) -> &'static str {
        match self.inner.model {
            Model::Slr => "slr",
            Model::Chislr => "chislr",
        }
    }

    #[getter]
    fn lambda_l(&self) -> f64 {
        self.inner.lambda_l
    }

    #[getter]
    fn lambda_g(&self) -> f64 {
        self.inner.lambda_g
    }

    #[getter]
    fn beta(&self) -> Option<f64> {
        self.inner.beta
    }

    #[getter]
    fn outer_iters(&self) -> usize {
        self.inner.outer_iters
    }

    #[getter]
    fn inner_iters(&self) -> usize {
        self.inner.inner_iters
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    fn __repr__(&self) -> String {
        format!("SolverConfig({})", self.to_json())
    }
}

#[pyclass(name = "Dictionary", frozen)]
pub struct PyDictionary {
    inner: hislr::Dictionary,
}

#[pymethods]
impl PyDictionary {
    /// `atoms` is d x n; class `c` owns the next `sizes[c]` columns.
    #[new]
    #[pyo3(signature = (atoms, sizes, labels, normalized=true))]
    fn new(
        atoms: Rows,
        sizes: Vec<usize>,
        labels: Vec<String>,
        normalized: bool,
    ) -> PyResult<Self> {
        let normalization = if normalized {
            Normalization::UnitL2Columns
        } else {
            Normalization::None
        };
        let inner =
            hislr::Dictionary::from_parts(to_matrix(&atoms)?, &sizes, labels, normalization)
                .map_err(err)?;
        Ok(PyDictionary { inner })
    }

    /// Builds from `(label, id, unit)` triples; every column of a unit becomes an atom.
    #[staticmethod]
    #[pyo3(signature = (units, normalized=true))]
    fn from_units(units: Vec<(String, String, Rows)>, normalized: bool) -> PyResult<Self> {
        let units = units
            .iter()
            .map(|(label, id, m)| {
                Ok(LabeledUnit {
                    label: label.clone(),
                    id: id.clone(),
                    matrix: to_matrix(m)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let normalization = if normalized {
            Normalization::UnitL2Columns
        } else {
            Normalization::None
        };
        Ok(PyDictionary {
            inner: build_dictionary(&units, normalization).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDictionary {
            inner: read_dictionary(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_dictionary(&path, &self.inner).map_err(err)
    }

    #[getter]
    fn atoms(&self) -> Rows {
        to_rows(self.inner.atoms())
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.partition().sizes()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dictionary(dim={}, atoms={}, classes={:?})",
            self.inner.dim(),
            self.inner.len(),
            self.inner.labels()
        )
    }
}

#[pyclass(name = "Decomposition", frozen)]
pub struct PyDecomposition {
    inner: hislr::Decomposition,
}

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn x(&self) -> Rows {
        to_rows(&self.inner.x)
    }

    #[getter]
    fn l(&self) -> Rows {
        to_rows(&self.inner.l)
    }

    #[getter]
    fn multiplier(&self) -> Rows {
        to_rows(&self.inner.multiplier)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn final_feasibility(&self) -> Option<f64> {
        self.inner.final_feasibility()
    }

    #[getter]
    fn final_rank(&self) -> Option<usize> {
        self.inner.final_rank()
    }

    /// `(iteration, objective, feasibility, rank)` per outer iteration.
    #[getter]
    fn history(&self) -> Vec<(usize, f64, f64, usize)> {
        self.inner
            .history
            .iter()
            .map(|r| (r.iteration, r.objective, r.feasibility, r.rank))
            .collect()
    }
}

#[pyclass(name = "ClassificationResult", frozen)]
pub struct PyClassificationResult {
    #[pyo3(get)]
    residuals: Vec<f64>,
    #[pyo3(get)]
    predicted: usize,
    #[pyo3(get)]
    label: String,
    #[pyo3(get)]
    margin: Option<f64>,
    #[pyo3(get)]
    decomposition: Py<PyDecomposition>,
}

fn config_or_default(config: Option<PySolverConfig>) -> hislr::SolverConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

#[pyfunction]
fn soft_threshold(v: f64, t: f64) -> PyResult<f64> {
    Ok(hislr::soft_threshold(v, threshold(t)?))
}

/// Singular value thresholding.
#[pyfunction]
fn svt(m: Rows, t: f64) -> PyResult<Rows> {
    Ok(to_rows(
        &hislr::svt(&to_matrix(&m)?, threshold(t)?).map_err(err)?,
    ))
}

/// Prox of `t1 ||Z||_1 + t2 sum_G ||Z_G||_F` with contiguous row groups of the given sizes.
#[pyfunction]
fn prox_hier(v: Rows, t1: f64, t2: f64, group_sizes: Vec<usize>) -> PyResult<Rows> {
    let labels = (0..group_sizes.len()).map(|g| g.to_string()).collect();
    let partition = GroupPartition::from_sizes(&group_sizes, labels).map_err(err)?;
    let z = hislr::prox_hier(&to_matrix(&v)?, threshold(t1)?, threshold(t2)?, &partition)
        .map_err(err)?;
    Ok(to_rows(&z))
}

#[pyfunction]
#[pyo3(name = "lasso_solve", signature = (d, b, lam, iters=100))]
fn py_lasso_solve(d: Rows, b: Rows, lam: f64, iters: usize) -> PyResult<Rows> {
    Ok(to_rows(
        &lasso_solve(&to_matrix(&d)?, &to_matrix(&b)?, lam, iters).map_err(err)?,
    ))
}

#[pyfunction]
#[pyo3(signature = (y, dictionary, config=None))]
fn admm_solve(
    py: Python<'_>,
    y: Rows,
    dictionary: &PyDictionary,
    config: Option<PySolverConfig>,
) -> PyResult<PyDecomposition> {
    let y = to_matrix(&y)?;
    let cfg = config_or_default(config);
    let inner = py
        .detach(|| hislr::admm_solve(&y, &dictionary.inner, &cfg))
        .map_err(err)?;
    Ok(PyDecomposition { inner })
}

#[pyfunction]
#[pyo3(signature = (y, dictionary, config=None))]
fn classify(
    py: Python<'_>,
    y: Rows,
    dictionary: &PyDictionary,
    config: Option<PySolverConfig>,
) -> PyResult<PyClassificationResult> {
    let y = to_matrix(&y)?;
    let cfg = config_or_default(config);
    let res = py
        .detach(|| hislr::classify(&y, &dictionary.inner, &cfg))
        .map_err(err)?;
    Ok(PyClassificationResult {
        label: dictionary.inner.labels()[res.predicted].clone(),
        residuals: res.residuals,
        predicted: res.predicted,
        margin: res.margin,
        decomposition: Py::new(
            py,
            PyDecomposition {
                inner: res.decomposition,
            },
        )?,
    })
}

/// Returns a dict with `dictionary`, `y`, `x_true`, `l_true` and `class`.
#[pyfunction]
#[pyo3(signature = (d=100, k=7, atoms_per_class=10, tau=8, active_class=0, coeff_sparsity=0.5, neutral_scale=1.0, noise_sigma=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic<'py>(
    py: Python<'py>,
    d: usize,
    k: usize,
    atoms_per_class: usize,
    tau: usize,
    active_class: usize,
    coeff_sparsity: f64,
    neutral_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = SyntheticSpec {
        d,
        k,
        atoms_per_class,
        tau,
        active_class,
        coeff_sparsity,
        neutral_scale,
        noise_sigma,
        rng_seed: seed,
    };
    let inst = generate(&spec).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("y", to_rows(&inst.sample.y))?;
    out.set_item("x_true", to_rows(&inst.sample.x_true))?;
    out.set_item("l_true", to_rows(&inst.sample.l_true))?;
    out.set_item("class", inst.sample.class)?;
    out.set_item(
        "dictionary",
        PyDictionary {
            inner: inst.dictionary,
        },
    )?;
    Ok(out)
}

/// Runs an experiment described by a JSON configuration and returns the report as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py.detach(|| run(&cfg)).map_err(err)?;
    Ok(report_to_json(&report))
}

#[pymodule]
fn pyhislr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyDictionary>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_class::<PyClassificationResult>()?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(svt, m)?)?;
    m.add_function(wrap_pyfunction!(prox_hier, m)?)?;
    m.add_function(wrap_pyfunction!(py_lasso_solve, m)?)?;
    m.add_function(wrap_pyfunction!(admm_solve, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
