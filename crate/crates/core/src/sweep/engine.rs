use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{Observable, SweepAxis, SweepSpec};
use super::SweepError;
use crate::model::{
    cpa_eigenfrequencies, effective_hamiltonian, hamiltonian_eigen, loaded_hamiltonian,
    magnon_frequency, FeedConfig, SystemParams,
};
use crate::scattering::{s_matrix, two_feed_output};

/// Lowest level written for `power_dB`; exact zeros would otherwise be -inf.
pub const DB_FLOOR: f64 = -300.0;

pub const DB_CONVENTION: &str =
    "power_dB = 10*log10(power/reference); reference = 1+q (total injected power) for total_power, 1 for one-port S-parameters; floored at -300 dB";

/// `10 log10(power / reference)`, floored at [`DB_FLOOR`].
pub fn to_db(power: f64, reference: f64) -> f64 {
    (10.0 * (power / reference).log10()).max(DB_FLOOR)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub db_convention: String,
    pub spec: SweepSpec,
}

/// Grid of one observable over (sweep value x probe frequency).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub observable: Observable,
    pub sweep_values: Vec<f64>,
    /// Probe frequencies, MHz.
    pub frequencies: Vec<f64>,
    /// `power[column][row]`: column per sweep value, row per frequency.
    pub power: Vec<Vec<f64>>,
    /// Per-column reference power for the dB scale.
    pub reference: Vec<f64>,
    /// Per-column analytic eigenfrequencies (MHz); empty where none apply.
    pub overlay: Vec<Vec<f64>>,
    pub metadata: Provenance,
}

impl SweepResult {
    pub fn db(&self, column: usize, row: usize) -> f64 {
        to_db(self.power[column][row], self.reference[column])
    }

    pub fn column_db(&self, column: usize) -> Vec<f64> {
        (0..self.frequencies.len()).map(|r| self.db(column, r)).collect()
    }

    pub fn check_invariants(&self) -> Result<(), SweepError> {
        let cols = self.sweep_values.len();
        let rows = self.frequencies.len();
        if self.power.len() != cols || self.reference.len() != cols || self.overlay.len() != cols {
            return Err(SweepError::InvalidResult("column count mismatch".into()));
        }
        for col in &self.power {
            if col.len() != rows {
                return Err(SweepError::InvalidResult("row count mismatch".into()));
            }
            if col.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(SweepError::InvalidResult("power must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Parameters and feed of one sweep column.
pub fn column_setup(spec: &SweepSpec, value: f64) -> Result<(SystemParams, FeedConfig), SweepError> {
    let base = spec.resolved_base()?;
    let feed = spec.feed;
    Ok(match spec.axis {
        SweepAxis::MagnonFrequency(_) => (base.with_omega_m(value)?, feed),
        SweepAxis::Field(_) => (base.with_omega_m(magnon_frequency(value, &spec.field_map)?)?, feed),
        SweepAxis::Displacement(_) => (spec.displaced(spec.base, value)?, feed),
        SweepAxis::Phase(_) => (base, FeedConfig::new(value, feed.q())?),
        SweepAxis::Ratio(_) => (base, FeedConfig::new(feed.delta_phi(), value)?),
    })
}

/// The observable at one cell; this is the only place sweep values come from.
pub fn evaluate(
    observable: Observable,
    freq: f64,
    p: &SystemParams,
    feed: &FeedConfig,
) -> Result<f64, SweepError> {
    Ok(match observable {
        Observable::TotalPower => two_feed_output(freq, p, feed)?.total_power,
        Observable::S11Power => s_matrix(freq, p)?.s11.norm_sqr(),
        Observable::S21Power => s_matrix(freq, p)?.s21.norm_sqr(),
    })
}

fn reference_power(observable: Observable, feed: &FeedConfig) -> f64 {
    match observable {
        Observable::TotalPower => feed.input_power(),
        _ => 1.0,
    }
}

fn overlay_for(spec: &SweepSpec, p: &SystemParams) -> Result<Vec<f64>, SweepError> {
    Ok(match spec.axis {
        SweepAxis::Displacement(_) => {
            if p.g_m() >= p.gamma_m() {
                let (hi, lo) = cpa_eigenfrequencies(p.omega_c(), p.g_m(), p.gamma_m())?;
                vec![lo.re, hi.re]
            } else {
                Vec::new()
            }
        }
        SweepAxis::MagnonFrequency(_) | SweepAxis::Field(_) => {
            let h = match spec.observable {
                Observable::TotalPower => effective_hamiltonian(p),
                _ => loaded_hamiltonian(p),
            };
            let eig = hamiltonian_eigen(&h);
            vec![eig.values[1].re, eig.values[0].re]
        }
        SweepAxis::Phase(_) | SweepAxis::Ratio(_) => Vec::new(),
    })
}

struct Column {
    power: Vec<f64>,
    reference: f64,
    overlay: Vec<f64>,
}

fn column(spec: &SweepSpec, value: f64, freqs: &[f64]) -> Result<Column, SweepError> {
    let (p, feed) = column_setup(spec, value)?;
    let power = freqs
        .iter()
        .map(|&w| evaluate(spec.observable, w, &p, &feed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Column {
        power,
        reference: reference_power(spec.observable, &feed),
        overlay: overlay_for(spec, &p)?,
    })
}

/// Evaluate every column of `spec` on the current rayon pool.
pub fn run(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let values = spec.axis.values();
    let freqs = spec.probe_frequencies()?;
    let columns = values
        .par_iter()
        .map(|&v| column(spec, v, &freqs))
        .collect::<Result<Vec<_>, _>>()?;

    let mut power = Vec::with_capacity(columns.len());
    let mut reference = Vec::with_capacity(columns.len());
    let mut overlay = Vec::with_capacity(columns.len());
    for c in columns {
        power.push(c.power);
        reference.push(c.reference);
        overlay.push(c.overlay);
    }
    let result = SweepResult {
        parameter: spec.axis.name().to_string(),
        observable: spec.observable,
        sweep_values: values,
        frequencies: freqs,
        power,
        reference,
        overlay,
        metadata: Provenance {
            toolkit: "magcpa".into(),
            version: crate::VERSION.into(),
            db_convention: DB_CONVENTION.into(),
            spec: spec.clone(),
        },
    };
    result.check_invariants()?;
    Ok(result)
}

/// [`run`] on a dedicated pool of `threads` workers.
pub fn run_with_threads(spec: &SweepSpec, threads: usize) -> Result<SweepResult, SweepError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SweepError::InvalidSpec(format!("thread pool: {e}")))?;
    pool.install(|| run(spec))
}

fn expect_axis(spec: &SweepSpec, ok: bool, expected: &'static str) -> Result<(), SweepError> {
    if ok {
        Ok(())
    } else {
        Err(SweepError::WrongAxis {
            expected,
            found: spec.axis.name(),
        })
    }
}

/// Sweep the magnon frequency, directly or through the static field.
pub fn sweep_field(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    expect_axis(
        spec,
        matches!(spec.axis, SweepAxis::MagnonFrequency(_) | SweepAxis::Field(_)),
        "omega_m_MHz or b0_mT",
    )?;
    run(spec)
}

/// Sweep the sphere displacement; each column uses `g_m(x)` and the cavity
/// overrides at `x`, and overlays the real CPA frequencies where `g_m >= gamma_m`.
pub fn sweep_displacement(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    expect_axis(spec, matches!(spec.axis, SweepAxis::Displacement(_)), "x_mm")?;
    run(spec)
}

pub fn sweep_phase(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    expect_axis(spec, matches!(spec.axis, SweepAxis::Phase(_)), "delta_phi_rad")?;
    run(spec)
}

pub fn sweep_ratio(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    expect_axis(spec, matches!(spec.axis, SweepAxis::Ratio(_)), "q")?;
    run(spec)
}
