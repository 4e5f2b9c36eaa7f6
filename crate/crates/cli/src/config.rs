use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hislr::data::SyntheticSpec;
use hislr::experiment::{DataSource, ExperimentConfig};
use hislr::{Model, Normalization, SolverConfig};
use serde::Deserialize;

/// Settings file accepted by every subcommand: an experiment configuration
/// in which every key is optional. Subcommands read the parts they need.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub source: Option<DataSource>,
    pub repeats: Option<usize>,
    pub solver: Option<SolverConfig>,
    pub normalization: Option<Normalization>,
    pub rng_seed: Option<u64>,
    pub exclude_diverged: Option<bool>,
    pub output: Option<PathBuf>,
}

impl FileConfig {
    /// Reads `path`; a dataset manifest given relatively is taken relative
    /// to the file.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: FileConfig = serde_json::from_str(&text).map_err(|e| hislr::Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(DataSource::Dataset { manifest, .. }) = &mut cfg.source {
            if manifest.is_relative() {
                *manifest = path.parent().unwrap_or(Path::new(".")).join(&*manifest);
            }
        }
        Ok(cfg)
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default()
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        match &self.source {
            Some(DataSource::Synthetic { spec, .. }) => spec.clone(),
            _ => SyntheticSpec::default(),
        }
    }

    pub fn into_experiment(self) -> ExperimentConfig {
        let base = ExperimentConfig::synthetic(SyntheticSpec::default(), DEFAULT_TEST_PER_CLASS);
        ExperimentConfig {
            solver: self.solver.unwrap_or(base.solver),
            source: self.source.unwrap_or(base.source),
            repeats: self.repeats.unwrap_or(base.repeats),
            normalization: self.normalization.unwrap_or(base.normalization),
            rng_seed: self.rng_seed.unwrap_or(base.rng_seed),
            exclude_diverged: self.exclude_diverged.unwrap_or(base.exclude_diverged),
            output: self.output,
        }
    }
}

pub const DEFAULT_TEST_PER_CLASS: usize = 5;

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// slr or chislr
    #[arg(long)]
    pub model: Option<Model>,
    #[arg(long = "lambda-l")]
    pub lambda_l: Option<f64>,
    #[arg(long = "lambda-g")]
    pub lambda_g: Option<f64>,
    /// ADMM penalty; defaults to 1.25 / ||Y||_2 per signal.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "outer-iters")]
    pub outer_iters: Option<usize>,
    #[arg(long = "inner-iters")]
    pub inner_iters: Option<usize>,
    /// Stop once ||Y - DX - L||_F <= tol * ||Y||_F.
    #[arg(long = "feas-tol")]
    pub feas_tol: Option<f64>,
}

impl SolverArgs {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(model) = self.model {
            cfg.model = model;
        }
        if let Some(v) = self.lambda_l {
            cfg.lambda_l = v;
        }
        if let Some(v) = self.lambda_g {
            cfg.lambda_g = v;
        }
        if self.beta.is_some() {
            cfg.beta = self.beta;
        }
        if let Some(v) = self.outer_iters {
            cfg.outer_iters = v;
        }
        if let Some(v) = self.inner_iters {
            cfg.inner_iters = v;
        }
        if let Some(v) = self.feas_tol {
            cfg.feas_tol = v;
        }
    }
}

/// Applies the unit-length flags to an experiment source.
pub fn apply_taus(
    source: &mut DataSource,
    tau_trn: Option<usize>,
    tau_tst: Option<usize>,
) -> Result<()> {
    match source {
        DataSource::Synthetic { spec, .. } => {
            if tau_trn.is_some() {
                bail!(hislr::Error::InvalidParameter(
                    "--tau-trn applies to dataset sources; synthetic atoms are single columns"
                        .into()
                ));
            }
            if let Some(t) = tau_tst {
                spec.tau = t;
            }
        }
        DataSource::Dataset {
            tau_trn: trn,
            tau_tst: tst,
            ..
        } => {
            if let Some(t) = tau_trn {
                *trn = t;
            }
            if let Some(t) = tau_tst {
                *tst = t;
            }
        }
    }
    Ok(())
}
