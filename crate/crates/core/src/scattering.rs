//! Input-output scattering of the two-port cavity.
//!
//! One-feed S-parameters follow from the steady state of the coupled
//! cavity-magnon Langevin equations:
//!
//! ```text
//! S21 = S12 = -2 sqrt(k1 k2) / D
//! S11       = -1 - 2 k1 / D
//! S22       = -1 - 2 k2 / D
//! D = i(w - wc) - (k1 + k2 + kint) + g² / (i(w - wm) - gamma)
//! ```
//!
//! With both ports fed (port 2 at unit amplitude, port 1 at
//! `sqrt(q) e^{-i dphi}`), the outgoing amplitudes are
//! `S1- = sqrt(q) e^{-i dphi} S11 + S12` and `S2- = S22 + sqrt(q) e^{-i dphi} S21`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid;
use crate::model::{FeedConfig, ModelError, SystemParams};

/// A local minimum of the total output counts as coherent perfect absorption
/// when it sits below this fraction of the injected power (-30 dB).
pub const CPA_THRESHOLD: f64 = 1e-3;

/// Final bracket width of the golden-section refinement, MHz.
pub const REFINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatteringError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("undamped magnon (gamma_m = 0) probed exactly at omega_m = {freq} MHz with g_m > 0")]
    SingularCoupling { freq: f64 },
    #[error("scattering denominator vanishes at {freq} MHz")]
    SingularDenominator { freq: f64 },
    #[error("kappa_2 = 0: the CPA power ratio kappa_1/kappa_2 is undefined")]
    ZeroKappa2,
    #[error("empty frequency band [{lo}, {hi}] MHz")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SParams {
    pub s11: Complex64,
    pub s21: Complex64,
    pub s12: Complex64,
    pub s22: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoFeedOutput {
    pub s1_out: Complex64,
    pub s2_out: Complex64,
    /// `|S1-|² + |S2-|²`, in units of the port-2 feed power.
    pub total_power: f64,
}

impl TwoFeedOutput {
    fn new(s1_out: Complex64, s2_out: Complex64) -> Self {
        Self {
            s1_out,
            s2_out,
            total_power: s1_out.norm_sqr() + s2_out.norm_sqr(),
        }
    }
}

/// Common denominator `D(w)` of the one-feed S-parameters.
fn denominator(freq: f64, p: &SystemParams) -> Result<Complex64, ScatteringError> {
    let cavity = Complex64::new(-p.kappa_c(), freq - p.omega_c());
    let g2 = p.g_m() * p.g_m();
    let d = if g2 == 0.0 {
        cavity
    } else {
        let magnon = Complex64::new(-p.gamma_m(), freq - p.omega_m());
        if magnon.re == 0.0 && magnon.im == 0.0 {
            return Err(ScatteringError::SingularCoupling { freq });
        }
        cavity + g2 / magnon
    };
    if d.norm_sqr() == 0.0 || !d.is_finite() {
        return Err(ScatteringError::SingularDenominator { freq });
    }
    Ok(d)
}

/// One-feed S-parameters at probe frequency `freq` (MHz).
pub fn s_matrix(freq: f64, p: &SystemParams) -> Result<SParams, ScatteringError> {
    if !freq.is_finite() {
        return Err(ModelError::NonFinite {
            name: "freq",
            value: freq,
        }
        .into());
    }
    let d = denominator(freq, p)?;
    let transmission = -2.0 * (p.kappa_1() * p.kappa_2()).sqrt() / d;
    Ok(SParams {
        s11: -1.0 - 2.0 * p.kappa_1() / d,
        s21: transmission,
        s12: transmission,
        s22: -1.0 - 2.0 * p.kappa_2() / d,
    })
}

/// Outgoing port amplitudes under simultaneous coherent feeding of both ports.
pub fn two_feed_output(
    freq: f64,
    p: &SystemParams,
    feed: &FeedConfig,
) -> Result<TwoFeedOutput, ScatteringError> {
    let s = s_matrix(freq, p)?;
    let a1 = feed.port1_amplitude();
    Ok(TwoFeedOutput::new(a1 * s.s11 + s.s12, s.s22 + a1 * s.s21))
}

/// Feed settings that make the total output vanish at the CPA frequencies:
/// in-phase feeds with power ratio `kappa_1 / kappa_2`.
pub fn cpa_feed_conditions(p: &SystemParams) -> Result<FeedConfig, ScatteringError> {
    if p.kappa_2() == 0.0 {
        return Err(ScatteringError::ZeroKappa2);
    }
    Ok(FeedConfig::new(0.0, p.kappa_1() / p.kappa_2())?)
}

/// Closed form of the two-feed output on the PT manifold
/// (`omega_c = omega_m = omega_0`, `kappa_1 + kappa_2 - kappa_int = gamma_m`,
/// in-phase feeds):
///
/// ```text
/// S1- = sqrt(q) (|Q|² - g²) / (Q² - 2 Q kint + g²),   S2- = S1- / sqrt(q)
/// Q = i(w - w0) - gamma
/// ```
///
/// The caller is responsible for the PT conditions; off the manifold the
/// result does not describe the device.
pub fn reduced_output(
    freq: f64,
    omega_0: f64,
    gamma_m: f64,
    g_m: f64,
    kappa_int: f64,
    q: f64,
) -> TwoFeedOutput {
    let big_q = Complex64::new(-gamma_m, freq - omega_0);
    let g2 = g_m * g_m;
    let numerator = big_q.norm_sqr() - g2;
    let den = big_q * big_q - 2.0 * kappa_int * big_q + g2;
    let s2 = numerator / den;
    TwoFeedOutput::new(q.sqrt() * s2, s2)
}

/// A refined minimum of an output spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    /// MHz
    pub frequency: f64,
    /// Linear power at the minimum.
    pub power: f64,
    /// Power relative to the reference (injected) power, dB.
    pub depth_db: f64,
}

fn check_band(band: (f64, f64), resolution: f64) -> Result<(), ScatteringError> {
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(ScatteringError::EmptyBand { lo, hi });
    }
    if !resolution.is_finite() || resolution <= 0.0 {
        return Err(ScatteringError::BadResolution(resolution));
    }
    Ok(())
}

/// Scan `band` at `resolution`, then refine every interior local minimum by
/// golden-section search. Minima that refine onto the same point are merged.
fn scan_minima<F>(f: F, band: (f64, f64), resolution: f64) -> Result<Vec<(f64, f64)>, ScatteringError>
where
    F: Fn(f64) -> Result<f64, ScatteringError>,
{
    let freqs = grid::uniform(band.0, band.1, resolution);
    let values = freqs.iter().map(|&w| f(w)).collect::<Result<Vec<_>, _>>()?;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in grid::local_minima(&values) {
        let (lo, hi) = (freqs[i - 1], freqs[i + 1]);
        // errors were ruled out on the grid; a singular point inside the
        // bracket is treated as a maximum so the search steps away from it
        let (w, v) = grid::golden_section(|w| f(w).unwrap_or(f64::INFINITY), lo, hi, REFINE_TOL);
        let (w, v) = if v <= values[i] { (w, v) } else { (freqs[i], values[i]) };
        let (w, v) = grid::parabolic_polish(|w| f(w).unwrap_or(f64::INFINITY), w, v, REFINE_TOL);
        match out.last_mut() {
            Some(prev) if (prev.0 - w).abs() < 10.0 * REFINE_TOL => {
                if v < prev.1 {
                    *prev = (w, v);
                }
            }
            _ => out.push((w, v)),
        }
    }
    Ok(out)
}

fn to_db(power: f64, reference: f64) -> f64 {
    10.0 * (power / reference).log10()
}

/// CPA dips of the total two-feed output inside `band` (MHz), in ascending
/// frequency. Only minima below [`CPA_THRESHOLD`] of the injected power count.
pub fn find_cpa_dips(
    p: &SystemParams,
    feed: &FeedConfig,
    band: (f64, f64),
    resolution: f64,
) -> Result<Vec<Dip>, ScatteringError> {
    check_band(band, resolution)?;
    let input = feed.input_power();
    let minima = scan_minima(|w| Ok(two_feed_output(w, p, feed)?.total_power), band, resolution)?;
    Ok(minima
        .into_iter()
        .filter(|&(_, v)| v < CPA_THRESHOLD * input)
        .map(|(frequency, power)| Dip {
            frequency,
            power,
            depth_db: to_db(power, input),
        })
        .collect())
}

/// All local minima of the one-feed reflection `|S11|²` inside `band`.
pub fn find_reflection_dips(
    p: &SystemParams,
    band: (f64, f64),
    resolution: f64,
) -> Result<Vec<Dip>, ScatteringError> {
    check_band(band, resolution)?;
    let minima = scan_minima(|w| Ok(s_matrix(w, p)?.s11.norm_sqr()), band, resolution)?;
    Ok(minima
        .into_iter()
        .map(|(frequency, power)| Dip {
            frequency,
            power,
            depth_db: to_db(power, 1.0),
        })
        .collect())
}
