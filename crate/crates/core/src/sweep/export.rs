use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::analysis::MinimaTrace;
use super::engine::{SweepResult, DB_CONVENTION};
use super::SweepError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "sweep_param,sweep_value,freq_MHz,power,power_dB";

/// Long-form CSV, one row per grid cell, preceded by a `#` line stating the dB reference.
pub fn to_csv(result: &SweepResult) -> String {
    let rows = result.sweep_values.len() * result.frequencies.len();
    let mut out = String::with_capacity(64 * rows + 256);
    let _ = writeln!(out, "# {DB_CONVENTION}");
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (c, &v) in result.sweep_values.iter().enumerate() {
        for (r, &f) in result.frequencies.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                result.parameter,
                v,
                f,
                result.power[c][r],
                result.db(c, r)
            );
        }
    }
    out
}

pub fn to_json(result: &SweepResult) -> Result<String, SweepError> {
    Ok(serde_json::to_string_pretty(result)?)
}

/// Inverse of [`to_json`]; the grid comes back bit-exact.
pub fn from_json(text: &str) -> Result<SweepResult, SweepError> {
    let result: SweepResult = serde_json::from_str(text)?;
    result.check_invariants()?;
    Ok(result)
}

pub fn minima_to_csv(trace: &MinimaTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {DB_CONVENTION}");
    out.push_str("sweep_param,sweep_value,freq_MHz,min_power_dB,averaged\n");
    for e in &trace.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            trace.parameter, e.sweep_value, e.frequency, e.value_db, e.averaged
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), SweepError> {
    fs::write(path, text).map_err(|source| SweepError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write `result` to `path` in the given format.
pub fn export(result: &SweepResult, format: Format, path: &Path) -> Result<(), SweepError> {
    let text = match format {
        Format::Csv => to_csv(result),
        Format::Json => to_json(result)?,
    };
    write_text(path, &text)
}
