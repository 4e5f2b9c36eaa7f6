//! Joint sparse-representation and low-rank decomposition of multichannel
//! signals, and classification by minimal class residual.
//!
//! A signal `Y` (one column per frame) is split as `Y = D X + L`, where `D`
//! is a dictionary of labelled training atoms, `X` is a sparse coefficient
//! matrix and `L` is a low-rank matrix absorbing what is shared by every
//! frame (for faces, the neutral identity). Two models are supported:
//!
//! * [`Model::Slr`]: `min ||X||_1 + lambda_L ||L||_*`
//! * [`Model::Chislr`]: the same plus `lambda_G * sum_G ||X_G||_F` over the
//!   class groups of atoms, which favours coefficients concentrated in one
//!   class across all frames.
//!
//! Both are solved with ADMM ([`admm_solve`]); the test signal is then
//! assigned to the class whose atoms leave the smallest residual
//! ([`classify`]).

pub mod data;
pub mod error;
pub mod experiment;
pub mod io;
pub mod model;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{
    build_dictionary, class_residuals, classify, AtomSource, ClassificationResult, Dictionary,
    LabeledUnit, Normalization,
};
pub use prox::{
    group_soft_threshold, prox_hier, soft_threshold, soft_threshold_matrix, svt, GroupPartition,
    Threshold,
};
pub use solvers::{
    admm_solve, lasso_solve, xstep_chislr, Decomposition, IterationRecord, Model, SolverConfig,
    StepRule,
};

/// Dense real matrix used throughout the crate (column-major).
pub type Matrix = nalgebra::DMatrix<f64>;
