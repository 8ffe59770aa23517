use serde::{Deserialize, Serialize};

use super::SweepError;
use crate::grid;
use crate::model::{
    coupling_from_displacement, cpa_eigenfrequencies, CavityOverrides, CouplingMap, FeedConfig,
    MagnonFieldMap, SystemParams,
};

/// Closed range sampled at a fixed step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Range {
    pub fn new(start: f64, end: f64, step: f64) -> Self {
        Self { start, end, step }
    }

    /// `center ± half_width` sampled at `step`.
    pub fn around(center: f64, half_width: f64, step: f64) -> Self {
        Self::new(center - half_width, center + half_width, step)
    }

    fn validate(&self, what: &str) -> Result<(), SweepError> {
        let Range { start, end, step } = *self;
        if !(start.is_finite() && end.is_finite() && step.is_finite()) {
            return Err(SweepError::InvalidSpec(format!("{what}: non-finite range")));
        }
        if step <= 0.0 {
            return Err(SweepError::InvalidSpec(format!("{what}: step must be positive, got {step}")));
        }
        if end < start {
            return Err(SweepError::InvalidSpec(format!(
                "{what}: empty range [{start}, {end}]"
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        grid::uniform(self.start, self.end, self.step)
    }
}

/// The swept quantity and its range.
///
/// Phase values are placed on integer multiples of `step` inside
/// `(start, end]`, so that an in-phase feed (0) is always sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Magnon frequency, MHz.
    MagnonFrequency(Range),
    /// Static field, mT, mapped through the Kittel relation.
    Field(Range),
    /// Sphere displacement from the cavity center, mm.
    Displacement(Range),
    /// Feed phase difference, rad.
    Phase(Range),
    /// Feed power ratio.
    Ratio(Range),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::MagnonFrequency(_) => "omega_m_MHz",
            SweepAxis::Field(_) => "b0_mT",
            SweepAxis::Displacement(_) => "x_mm",
            SweepAxis::Phase(_) => "delta_phi_rad",
            SweepAxis::Ratio(_) => "q",
        }
    }

    pub fn range(&self) -> &Range {
        match self {
            SweepAxis::MagnonFrequency(r)
            | SweepAxis::Field(r)
            | SweepAxis::Displacement(r)
            | SweepAxis::Phase(r)
            | SweepAxis::Ratio(r) => r,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::Phase(r) => grid::anchored(r.start, r.end, r.step),
            _ => self.range().points(),
        }
    }
}

/// What is recorded at each (sweep value, probe frequency) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `|S1-|² + |S2-|²` with both ports fed; reference power `1 + q`.
    TotalPower,
    /// One-feed reflection `|S11|²`.
    S11Power,
    /// One-feed transmission `|S21|²`.
    S21Power,
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::TotalPower => "total_power",
            Observable::S11Power => "s11_power",
            Observable::S21Power => "s21_power",
        }
    }
}

/// Probe frequencies (MHz) at which every column is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    Grid(Range),
    Points { frequencies: Vec<f64> },
    /// The upper CPA frequency `omega_c + sqrt(g² - gamma²)` of the base
    /// configuration, or `omega_c` itself in the broken phase.
    UpperCpa,
    /// The cavity frequency of the base configuration.
    Cavity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub probe: Probe,
    pub base: SystemParams,
    pub feed: FeedConfig,
    pub observable: Observable,
    #[serde(default)]
    pub coupling: CouplingMap,
    #[serde(default)]
    pub field_map: MagnonFieldMap,
    #[serde(default)]
    pub overrides: Option<CavityOverrides>,
    /// Fixed sphere position (mm) applied to the base parameters when the
    /// swept quantity is not the displacement itself.
    #[serde(default)]
    pub displacement: Option<f64>,
    /// Keep the magnon on resonance with the (possibly shifted) cavity mode
    /// whenever a displacement is applied.
    #[serde(default = "default_true")]
    pub track_resonance: bool,
}

fn default_true() -> bool {
    true
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, probe: Probe, base: SystemParams, feed: FeedConfig, observable: Observable) -> Self {
        Self {
            axis,
            probe,
            base,
            feed,
            observable,
            coupling: CouplingMap::default(),
            field_map: MagnonFieldMap::default(),
            overrides: None,
            displacement: None,
            track_resonance: true,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.axis.range().validate(self.axis.name())?;
        if self.axis.values().is_empty() {
            return Err(SweepError::InvalidSpec(format!("{}: no sweep points", self.axis.name())));
        }
        match self.axis {
            SweepAxis::Displacement(r) => {
                for x in [r.start, r.end] {
                    coupling_from_displacement(x, &self.coupling)?;
                }
            }
            SweepAxis::Ratio(r) if r.start <= 0.0 => {
                return Err(SweepError::InvalidSpec(format!(
                    "q: power ratio must stay positive, range starts at {}",
                    r.start
                )));
            }
            SweepAxis::Field(r) if r.start < 0.0 => {
                return Err(SweepError::InvalidSpec(format!(
                    "b0_mT: field must be non-negative, range starts at {}",
                    r.start
                )));
            }
            _ => {}
        }
        match &self.probe {
            Probe::Grid(r) => r.validate("probe")?,
            Probe::Points { frequencies } => {
                if frequencies.is_empty() || frequencies.iter().any(|f| !f.is_finite()) {
                    return Err(SweepError::InvalidSpec("probe: need finite frequencies".into()));
                }
            }
            Probe::UpperCpa | Probe::Cavity => {}
        }
        if let Some(x) = self.displacement {
            coupling_from_displacement(x, &self.coupling)?;
        }
        Ok(())
    }

    /// Apply a sphere displacement: coupling from the map, cavity shifts from
    /// the override table, and resonance tracking.
    pub(crate) fn displaced(&self, p: SystemParams, x: f64) -> Result<SystemParams, SweepError> {
        let mut p = p.with_coupling(coupling_from_displacement(x, &self.coupling)?)?;
        if let Some(table) = &self.overrides {
            p = table.apply(p, x)?;
        }
        if self.track_resonance {
            p = p.with_omega_m(p.omega_c())?;
        }
        Ok(p)
    }

    /// Base parameters with the fixed displacement (if any) applied.
    pub fn resolved_base(&self) -> Result<SystemParams, SweepError> {
        match self.displacement {
            Some(x) => self.displaced(self.base, x),
            None => Ok(self.base),
        }
    }

    pub fn probe_frequencies(&self) -> Result<Vec<f64>, SweepError> {
        let base = self.resolved_base()?;
        Ok(match &self.probe {
            Probe::Grid(r) => r.points(),
            Probe::Points { frequencies } => frequencies.clone(),
            Probe::Cavity => vec![base.omega_c()],
            Probe::UpperCpa => {
                let (upper, _) = cpa_eigenfrequencies(base.omega_c(), base.g_m(), base.gamma_m())?;
                vec![upper.re]
            }
        })
    }
}
