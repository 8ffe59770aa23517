use std::fmt::Write as _;
use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FitError;

pub const MIN_POINTS: usize = 10;

/// Which S-parameter a dataset samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Quantity {
    S11,
    S21,
}

impl std::str::FromStr for Quantity {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S11" => Ok(Quantity::S11),
            "S21" => Ok(Quantity::S21),
            other => Err(FitError::InvalidData(format!("unknown quantity {other:?} (expected S11 or S21)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Values {
    /// Complex amplitudes.
    Complex(Vec<Complex64>),
    /// Linear power `|S|²`.
    Power(Vec<f64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Complex(v) => v.len(),
            Values::Power(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn power(&self) -> Vec<f64> {
        match self {
            Values::Complex(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Values::Power(v) => v.clone(),
        }
    }
}

/// A measured or synthetic spectrum on a strictly increasing frequency grid (MHz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDataset {
    quantity: Quantity,
    frequencies: Vec<f64>,
    values: Values,
    weights: Option<Vec<f64>>,
}

impl SpectrumDataset {
    pub fn new(
        quantity: Quantity,
        frequencies: Vec<f64>,
        values: Values,
        weights: Option<Vec<f64>>,
    ) -> Result<Self, FitError> {
        let n = frequencies.len();
        if n < MIN_POINTS {
            return Err(FitError::InvalidData(format!("need at least {MIN_POINTS} points, got {n}")));
        }
        if values.len() != n {
            return Err(FitError::InvalidData(format!(
                "{n} frequencies but {} values",
                values.len()
            )));
        }
        if frequencies.iter().any(|f| !f.is_finite()) {
            return Err(FitError::InvalidData("non-finite frequency".into()));
        }
        if let Some(i) = frequencies.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FitError::InvalidData(format!(
                "frequencies must be strictly increasing (row {})",
                i + 1
            )));
        }
        let finite = match &values {
            Values::Complex(v) => v.iter().all(|z| z.is_finite()),
            Values::Power(v) => v.iter().all(|x| x.is_finite()),
        };
        if !finite {
            return Err(FitError::InvalidData("non-finite value".into()));
        }
        if let Some(w) = &weights {
            if w.len() != n || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(FitError::InvalidData("weights must be finite, non-negative, one per point".into()));
            }
        }
        Ok(Self {
            quantity,
            frequencies,
            values,
            weights,
        })
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.values, Values::Complex(_))
    }

    /// Parse `freq_GHz,re,im` or `freq_GHz,power_dB`.
    ///
    /// Lines starting with `#` are comments, except two recognized headers:
    /// `# quantity: S11|S21` overrides `default_quantity`, and
    /// `# db_reference: <dB>` gives the level that corresponds to `|S|² = 1`
    /// (default 0 dB).
    pub fn from_csv<R: Read>(reader: R, default_quantity: Quantity) -> Result<Self, FitError> {
        let mut text = String::new();
        let mut reader = reader;
        reader
            .read_to_string(&mut text)
            .map_err(|e| FitError::InvalidData(format!("read: {e}")))?;

        let mut quantity = default_quantity;
        let mut db_reference = 0.0;
        for line in text.lines() {
            let Some(rest) = line.trim().strip_prefix('#') else { continue };
            if let Some((key, value)) = rest.split_once(':') {
                match key.trim().to_ascii_lowercase().as_str() {
                    "quantity" => quantity = value.parse()?,
                    "db_reference" => {
                        db_reference = value.trim().parse().map_err(|_| {
                            FitError::InvalidData(format!("bad db_reference {:?}", value.trim()))
                        })?
                    }
                    _ => {}
                }
            }
        }

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| FitError::InvalidData(format!("csv header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let complex = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["freq_GHz", "re", "im"] => true,
            ["freq_GHz", "power_dB"] => false,
            other => {
                return Err(FitError::InvalidData(format!(
                    "unrecognized columns {other:?}; expected freq_GHz,re,im or freq_GHz,power_dB"
                )))
            }
        };

        let mut freqs = Vec::new();
        let mut cvals = Vec::new();
        let mut pvals = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| FitError::InvalidData(format!("csv: {e}")))?;
            let num = |k: usize| -> Result<f64, FitError> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| FitError::InvalidData(format!("record {}: bad number in column {}", i + 1, k + 1)))
            };
            freqs.push(num(0)? * 1e3);
            if complex {
                cvals.push(Complex64::new(num(1)?, num(2)?));
            } else {
                pvals.push(10f64.powf((num(1)? - db_reference) / 10.0));
            }
        }
        let values = if complex { Values::Complex(cvals) } else { Values::Power(pvals) };
        Self::new(quantity, freqs, values, None)
    }

    /// Inverse of [`SpectrumDataset::from_csv`] (power is written in dB re `|S|² = 1`).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let q = match self.quantity {
            Quantity::S11 => "S11",
            Quantity::S21 => "S21",
        };
        let _ = writeln!(out, "# quantity: {q}");
        match &self.values {
            Values::Complex(v) => {
                out.push_str("freq_GHz,re,im\n");
                for (f, z) in self.frequencies.iter().zip(v) {
                    let _ = writeln!(out, "{},{},{}", f / 1e3, z.re, z.im);
                }
            }
            Values::Power(v) => {
                let _ = writeln!(out, "# db_reference: 0");
                out.push_str("freq_GHz,power_dB\n");
                for (f, p) in self.frequencies.iter().zip(v) {
                    let _ = writeln!(out, "{},{}", f / 1e3, 10.0 * p.log10());
                }
            }
        }
        out
    }
}
