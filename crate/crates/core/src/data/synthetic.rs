use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dictionary, Normalization};
use crate::Matrix;

/// Parameters of a synthetic `Y = D X* + L* + noise` instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub d: usize,
    /// Number of classes.
    pub k: usize,
    pub atoms_per_class: usize,
    pub tau: usize,
    /// 0-based class holding the true coefficients.
    pub active_class: usize,
    /// Fraction of the active block's entries that are nonzero.
    pub coeff_sparsity: f64,
    /// Norm of the repeated neutral column.
    pub neutral_scale: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            d: 100,
            k: 7,
            atoms_per_class: 10,
            tau: 8,
            active_class: 0,
            coeff_sparsity: 0.5,
            neutral_scale: 1.0,
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.atoms_per_class == 0 || self.tau == 0 {
            return Err(Error::param("synthetic dimensions must be positive"));
        }
        if self.active_class >= self.k {
            return Err(Error::param(format!(
                "active class {} out of range for {} classes",
                self.active_class, self.k
            )));
        }
        if !(self.coeff_sparsity > 0.0 && self.coeff_sparsity <= 1.0) {
            return Err(Error::param(format!(
                "coeff_sparsity must lie in (0, 1], got {}",
                self.coeff_sparsity
            )));
        }
        for (name, v) in [
            ("neutral_scale", self.neutral_scale),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn class_labels(&self) -> Vec<String> {
        (1..=self.k).map(|c| format!("c{c}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub y: Matrix,
    pub x_true: Matrix,
    pub l_true: Matrix,
    pub class: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub dictionary: Dictionary,
    pub sample: SyntheticSample,
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `d x (k * atoms_per_class)` standard normal atoms scaled to unit length.
pub fn synthetic_dictionary<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> Result<Dictionary> {
    spec.validate()?;
    let n = spec.k * spec.atoms_per_class;
    let mut atoms = normal_matrix(spec.d, n, rng);
    for mut col in atoms.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Dictionary::from_parts(
        atoms,
        &vec![spec.atoms_per_class; spec.k],
        spec.class_labels(),
        Normalization::UnitL2Columns,
    )
}

/// Draws one signal of class `class` over an existing dictionary. Only the
/// generator fields of `spec` (`tau`, sparsity, scales) are used.
pub fn synthetic_sample<R: Rng>(
    dict: &Dictionary,
    spec: &SyntheticSpec,
    class: usize,
    rng: &mut R,
) -> Result<SyntheticSample> {
    spec.validate()?;
    if class >= dict.num_classes() {
        return Err(Error::param(format!("class {class} not in dictionary")));
    }
    let (d, tau) = (dict.dim(), spec.tau);
    let rows = dict.partition().group(class);
    let slots = rows.len() * tau;
    let active = ((spec.coeff_sparsity * slots as f64).round() as usize).clamp(1, slots);

    let mut x_true = Matrix::zeros(dict.len(), tau);
    for slot in index::sample(rng, slots, active) {
        x_true[(rows[slot / tau], slot % tau)] = rng.sample(StandardNormal);
    }

    let mut neutral = nalgebra::DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = neutral.norm();
    neutral *= spec.neutral_scale / norm;
    let l_true = Matrix::from_fn(d, tau, |i, _| neutral[i]);

    let mut y = dict.atoms() * &x_true + &l_true;
    if spec.noise_sigma > 0.0 {
        y += normal_matrix(d, tau, rng) * spec.noise_sigma;
    }
    Ok(SyntheticSample {
        y,
        x_true,
        l_true,
        class,
    })
}

/// A dictionary and one signal of `spec.active_class`, both determined by
/// `spec.rng_seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let dictionary = synthetic_dictionary(spec, &mut rng)?;
    let sample = synthetic_sample(&dictionary, spec, spec.active_class, &mut rng)?;
    Ok(SyntheticInstance { dictionary, sample })
}
