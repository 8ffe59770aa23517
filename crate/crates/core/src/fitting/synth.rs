use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{Quantity, SpectrumDataset, Values};
use super::FitError;
use crate::grid;
use crate::model::SystemParams;
use crate::scattering::s_matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Complex,
    Power,
}

/// Seeded noise applied to synthetic spectra.
///
/// `ComplexGaussian` adds independent normal noise to the real and imaginary
/// parts, with total noise power `10^(-snr/10)` times the mean signal power
/// `⟨|S|²⟩`. `Multiplicative` scales each power sample by `1 + σ·n` with
/// `σ = 10^(-snr/20)`. For power-valued output, `ComplexGaussian` is applied to
/// the amplitude before squaring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    ComplexGaussian { snr_db: f64 },
    Multiplicative { snr_db: f64 },
}

pub fn synth_spectrum(
    p: &SystemParams,
    band: (f64, f64),
    step: f64,
    quantity: Quantity,
    kind: ValueKind,
    noise: NoiseModel,
    seed: u64,
) -> Result<SpectrumDataset, FitError> {
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(FitError::InvalidSynthesis(format!("band [{lo}, {hi}] is empty")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(FitError::InvalidSynthesis(format!("step must be positive, got {step}")));
    }
    let snr = match noise {
        NoiseModel::None => None,
        NoiseModel::ComplexGaussian { snr_db } | NoiseModel::Multiplicative { snr_db } => Some(snr_db),
    };
    if snr.is_some_and(|s| !s.is_finite()) {
        return Err(FitError::InvalidSynthesis("snr_db must be finite".into()));
    }
    if matches!(noise, NoiseModel::Multiplicative { .. }) && kind == ValueKind::Complex {
        return Err(FitError::InvalidSynthesis(
            "multiplicative noise applies to power data only".into(),
        ));
    }

    let freqs = grid::uniform(lo, hi, step);
    let mut amps = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let s = s_matrix(f, p)?;
        amps.push(match quantity {
            Quantity::S11 => s.s11,
            Quantity::S21 => s.s21,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let NoiseModel::ComplexGaussian { snr_db } = noise {
        let mean_power = amps.iter().map(|z| z.norm_sqr()).sum::<f64>() / amps.len() as f64;
        let sigma = (mean_power * 10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
            for z in &mut amps {
                *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            }
        }
    }

    let values = match kind {
        ValueKind::Complex => Values::Complex(amps),
        ValueKind::Power => {
            let mut power: Vec<f64> = amps.iter().map(|z| z.norm_sqr()).collect();
            if let NoiseModel::Multiplicative { snr_db } = noise {
                let normal = Normal::new(0.0, 10f64.powf(-snr_db / 20.0)).expect("finite sigma");
                for v in &mut power {
                    *v *= 1.0 + normal.sample(&mut rng);
                }
            }
            Values::Power(power)
        }
    };
    SpectrumDataset::new(quantity, freqs, values, None)
}
