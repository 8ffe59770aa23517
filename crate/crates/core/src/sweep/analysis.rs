use serde::{Deserialize, Serialize};

use super::engine::SweepResult;
use super::spec::Observable;
use super::SweepError;
use crate::grid::local_minima;
use crate::model::{coupling_from_displacement, CouplingMap, SystemParams};
use crate::scattering::CPA_THRESHOLD;

/// Bisection stops once the bracket is narrower than this, mm.
pub const EP_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimumEntry {
    pub sweep_value: f64,
    /// Frequency of the deepest sample in the column, MHz.
    pub frequency: f64,
    /// dB relative to the column reference power.
    pub value_db: f64,
    /// True when two CPA branches were found and `value_db` is their average.
    pub averaged: bool,
    pub branch_frequencies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaTrace {
    pub parameter: String,
    pub entries: Vec<MinimumEntry>,
}

/// Per-column minimum of a sweep, in dB.
///
/// Columns with two or more minima below the CPA threshold (-30 dB) record
/// the average of the two deepest; other columns record the global minimum.
pub fn minima_trace(result: &SweepResult) -> Result<MinimaTrace, SweepError> {
    if result.sweep_values.is_empty() || result.frequencies.is_empty() {
        return Err(SweepError::EmptyResult);
    }
    let threshold_db = 10.0 * CPA_THRESHOLD.log10();
    let entries = (0..result.sweep_values.len())
        .map(|c| {
            let db = result.column_db(c);
            let (imin, vmin) = db
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty column");
            let mut dips: Vec<usize> = local_minima(&db)
                .into_iter()
                .filter(|&i| db[i] < threshold_db)
                .collect();
            dips.sort_by(|&a, &b| db[a].total_cmp(&db[b]));
            let entry = if dips.len() >= 2 {
                let mut pair = [dips[0], dips[1]];
                pair.sort_unstable();
                MinimumEntry {
                    sweep_value: result.sweep_values[c],
                    frequency: result.frequencies[imin],
                    value_db: 0.5 * (db[pair[0]] + db[pair[1]]),
                    averaged: true,
                    branch_frequencies: pair.iter().map(|&i| result.frequencies[i]).collect(),
                }
            } else {
                MinimumEntry {
                    sweep_value: result.sweep_values[c],
                    frequency: result.frequencies[imin],
                    value_db: vmin,
                    averaged: false,
                    branch_frequencies: vec![result.frequencies[imin]],
                }
            };
            entry
        })
        .collect();
    Ok(MinimaTrace {
        parameter: result.parameter.clone(),
        entries,
    })
}

/// Displacement at which `g_m(x) = gamma_m`, by bisection inside `bracket` (mm).
pub fn find_exceptional_point(
    base: &SystemParams,
    map: &CouplingMap,
    bracket: (f64, f64),
) -> Result<f64, SweepError> {
    let gamma = base.gamma_m();
    let h = |x: f64| -> Result<f64, SweepError> { Ok(coupling_from_displacement(x, map)? - gamma) };
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let (mut hlo, hhi) = (h(lo)?, h(hi)?);
    if hlo == 0.0 {
        return Ok(lo);
    }
    if hhi == 0.0 {
        return Ok(hi);
    }
    if hlo.signum() == hhi.signum() {
        return Err(SweepError::Bracket {
            lo,
            hi,
            detail: format!(
                "g_m - gamma_m has the same sign at both ends ({hlo:.6}, {hhi:.6} MHz)"
            ),
        });
    }
    while hi - lo > EP_TOL {
        let mid = 0.5 * (lo + hi);
        let hm = h(mid)?;
        if hm == 0.0 {
            return Ok(mid);
        }
        if hm.signum() == hlo.signum() {
            lo = mid;
            hlo = hm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Narrowest separation between the two dominant spectral branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchGap {
    pub sweep_value: f64,
    pub lower: f64,
    pub upper: f64,
    pub separation: f64,
}

/// Read the anti-crossing gap off a field sweep at grid resolution.
///
/// In every column the two most prominent extrema are taken (dips for
/// reflection and total output, peaks for transmission); the column where
/// they are closest gives the gap. Columns with a single branch are skipped.
pub fn anticrossing_gap(result: &SweepResult) -> Option<BranchGap> {
    let mut best: Option<BranchGap> = None;
    for (c, col) in result.power.iter().enumerate() {
        let signed: Vec<f64> = match result.observable {
            Observable::S21Power => col.iter().map(|v| -v).collect(),
            _ => col.clone(),
        };
        let mut idx = local_minima(&signed);
        if idx.len() < 2 {
            continue;
        }
        idx.sort_by(|&a, &b| signed[a].total_cmp(&signed[b]));
        let (a, b) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
        let gap = BranchGap {
            sweep_value: result.sweep_values[c],
            lower: result.frequencies[a],
            upper: result.frequencies[b],
            separation: result.frequencies[b] - result.frequencies[a],
        };
        if best.is_none_or(|g| gap.separation < g.separation) {
            best = Some(gap);
        }
    }
    best
}

/// Max minus min of the dB values in one row (fixed probe frequency).
pub fn dynamic_range_db(result: &SweepResult, row: usize) -> Option<(f64, f64)> {
    let values: Vec<f64> = (0..result.sweep_values.len()).map(|c| result.db(c, row)).collect();
    let (imin, vmin) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((vmax - vmin, result.sweep_values[imin]))
}
