//! Parameter extraction from spectra.
//!
//! [`fit_lorentzian`] handles bare-cavity transmission or reflection lines;
//! [`fit_coupled`] fits the full coupled-mode S-parameters. Both minimize a
//! weighted sum of squares with [`optimize::minimize`] and report standard
//! errors from the Jacobian at the optimum. [`synth_spectrum`] generates
//! seeded test data from the same model.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SystemParams};
use crate::scattering::ScatteringError;

mod coupled;
mod dataset;
mod lorentzian;
pub mod optimize;
mod synth;

pub use coupled::{fit_coupled, guess_from_spectrum, CoupledProblem, FitParam};
pub use dataset::{Quantity, SpectrumDataset, Values, MIN_POINTS};
pub use lorentzian::{fit_lorentzian, lorentzian};
pub use optimize::{Method, Settings};
pub use synth::{synth_spectrum, NoiseModel, ValueKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("not identifiable: {0}")]
    NotIdentifiable(String),
    #[error("invalid synthesis request: {0}")]
    InvalidSynthesis(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    /// One-sigma standard error; absent for fixed parameters and when the
    /// normal matrix at the optimum is singular.
    pub std_error: Option<f64>,
    pub fixed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub quantity: Quantity,
    pub n_points: usize,
    pub parameters: Vec<ParamEstimate>,
    /// Covariance of the free parameters, in the order they appear in
    /// `parameters`, in natural units.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub derived: BTreeMap<String, f64>,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// False whenever `converged` is false: the estimates are then only the
    /// best point visited.
    pub authoritative: bool,
    pub method: String,
    pub message: String,
    pub fixed: Vec<String>,
    /// Full parameter set for coupled fits.
    pub system: Option<SystemParams>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&ParamEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value).or_else(|| self.derived.get(name).copied())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::LevenbergMarquardt => "levenberg_marquardt",
        Method::SimplexThenLm => "simplex_then_levenberg_marquardt",
    }
}

/// `s² (JᵀJ)⁻¹` in the optimizer's coordinates, or `None` when the normal
/// matrix is numerically singular.
fn theta_covariance(jtj: &DMatrix<f64>, rss: f64, m: usize, settings: &Settings) -> Option<DMatrix<f64>> {
    let n = jtj.nrows();
    if optimize::scaled_condition(jtj) > settings.max_condition {
        return None;
    }
    let inv = jtj.clone().try_inverse()?;
    let dof = m.saturating_sub(n).max(1) as f64;
    Some(inv * (rss / dof))
}

/// Map a covariance through the diagonal Jacobian `d value / d theta`.
fn natural_covariance(cov: &DMatrix<f64>, scale: &[f64]) -> Vec<Vec<f64>> {
    let n = cov.nrows();
    (0..n)
        .map(|i| (0..n).map(|j| cov[(i, j)] * scale[i] * scale[j]).collect())
        .collect()
}
