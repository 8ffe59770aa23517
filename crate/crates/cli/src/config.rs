//! TOML run configuration.
//!
//! Frequencies are given in GHz, rates in MHz, displacements in mm and
//! phases in degrees; everything is converted to the engine's MHz/rad units
//! here. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use magcpa_core::fitting::{FitParam, NoiseModel, Quantity, ValueKind};
use magcpa_core::model::{
    CavityOverrides, CouplingMap, FeedConfig, MagnonFieldMap, ModelError, OverridePoint, SystemParams,
};
use magcpa_core::sweep::{Observable, Probe, Range, SweepAxis, SweepSpec};
use serde::Deserialize;

use crate::error::CliError;

/// GHz to MHz, rounded to 1 Hz so decimal inputs map to clean MHz values.
pub fn ghz_to_mhz(ghz: f64) -> f64 {
    (ghz * 1e9).round() / 1e6
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output stem for figure presets.
    pub figure: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub system: SystemSection,
    pub feed: Option<FeedSection>,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub field: FieldSection,
    pub overrides: Option<OverridesSection>,
    #[serde(default)]
    pub ep: EpSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub sweep: Vec<SweepSection>,
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega_c_ghz: f64,
    /// Defaults to `omega_c_ghz`.
    pub omega_m_ghz: Option<f64>,
    pub g_mhz: f64,
    pub kappa_1_mhz: f64,
    pub kappa_2_mhz: f64,
    pub kappa_int_mhz: f64,
    pub gamma_m_mhz: f64,
    /// Place the sphere at this displacement: `g` from the coupling map,
    /// cavity shifts from the override table, magnon tuned to the cavity.
    pub displacement_mm: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::reference();
        Self {
            omega_c_ghz: p.omega_c() / 1e3,
            omega_m_ghz: None,
            g_mhz: p.g_m(),
            kappa_1_mhz: p.kappa_1(),
            kappa_2_mhz: p.kappa_2(),
            kappa_int_mhz: p.kappa_int(),
            gamma_m_mhz: p.gamma_m(),
            displacement_mm: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedSection {
    #[serde(default)]
    pub delta_phi_deg: f64,
    /// Port-1 to port-2 power ratio; defaults to `kappa_1 / kappa_2`.
    pub q: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub slope_mhz_per_mm: f64,
    pub valid_range_mm: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        let m = CouplingMap::default();
        Self {
            slope_mhz_per_mm: m.slope,
            valid_range_mm: m.valid_range,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub gyromagnetic_mhz_per_mt: f64,
    pub omega_ai_ghz: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        let m = MagnonFieldMap::default();
        Self {
            gyromagnetic_mhz_per_mt: m.gyromagnetic_ratio,
            omega_ai_ghz: m.omega_ai / 1e3,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesSection {
    /// Use the built-in table.
    #[serde(default)]
    pub reference: bool,
    #[serde(default)]
    pub points: Vec<OverridePointSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridePointSection {
    pub x_mm: f64,
    pub omega_c_ghz: f64,
    pub kappa_int_mhz: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpSection {
    pub bracket_mm: [f64; 2],
}

impl Default for EpSection {
    fn default() -> Self {
        Self { bracket_mm: [0.0, 4.0] }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Defaults to the cavity frequency ± 30 MHz.
    pub freq_range_ghz: Option<[f64; 2]>,
    pub step_mhz: f64,
    /// Also evaluate the two-feed output (uses `[feed]`).
    pub two_feed: bool,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            freq_range_ghz: None,
            step_mhz: 0.01,
            two_feed: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    /// GHz
    MagnonFrequency,
    /// mT
    Field,
    /// mm
    Displacement,
    /// degrees
    Phase,
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Grid,
    UpperCpa,
    Cavity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Narrowest branch separation.
    Gap,
    /// Per-column minima (two-branch average where CPA dips exist).
    Minima,
    /// Spread in dB along the sweep at each probe frequency.
    DynamicRange,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub name: String,
    pub title: Option<String>,
    pub axis: AxisKind,
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub probe: ProbeKind,
    /// Grid probe span; defaults to the cavity frequency ± 30 MHz.
    pub probe_range_ghz: Option<[f64; 2]>,
    pub probe_step_mhz: Option<f64>,
    pub observable: Observable,
    pub displacement_mm: Option<f64>,
    pub track_resonance: Option<bool>,
    #[serde(default)]
    pub analysis: Vec<Analysis>,
    /// Write the full power grid (CSV, JSON, heatmap).
    #[serde(default = "yes")]
    pub grid_output: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    ComplexGaussian,
    Multiplicative,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub band_ghz: [f64; 2],
    pub step_mhz: f64,
    pub quantity: Quantity,
    pub kind: ValueKind,
    pub noise: NoiseKind,
    pub snr_db: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Coupled,
    Lorentzian,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub model: FitModel,
    /// Used when the data file does not state its quantity.
    pub quantity: Quantity,
    /// Parameters held at their `[system]` values.
    pub fixed: Vec<FitParam>,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            model: FitModel::Coupled,
            quantity: Quantity::S11,
            fixed: vec![FitParam::KappaInt],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
    /// Also write the cavity override table.
    pub overrides_table: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            csv: true,
            json: true,
            svg: true,
            overrides_table: false,
        }
    }
}

/// A parsed configuration together with its source text, for locating
/// domain errors.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub source: String,
    pub origin: String,
}

pub fn parse(text: &str, origin: &str) -> Result<Loaded, CliError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {}", e.to_string().trim_end())))?;
    Ok(Loaded {
        config,
        source: text.to_string(),
        origin: origin.to_string(),
    })
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

/// 1-based line of `key = ...` inside `[section]` (or at top level when
/// `section` is empty).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn model_key(e: &ModelError) -> Option<&'static str> {
    Some(match e {
        ModelError::NonFinite { name, .. } | ModelError::Negative { name, .. } | ModelError::NonPositive { name, .. } => {
            match *name {
                "omega_c" => "omega_c_ghz",
                "omega_m" => "omega_m_ghz",
                "g_m" => "g_mhz",
                "kappa_1" => "kappa_1_mhz",
                "kappa_2" => "kappa_2_mhz",
                "kappa_int" => "kappa_int_mhz",
                "gamma_m" => "gamma_m_mhz",
                "q" => "q",
                "slope" => "slope_mhz_per_mm",
                "valid_range" => "valid_range_mm",
                "gyromagnetic_ratio" => "gyromagnetic_mhz_per_mt",
                _ => return None,
            }
        }
        ModelError::DisplacementOutOfRange { .. } => "displacement_mm",
        _ => return None,
    })
}

impl Loaded {
    /// A config error, anchored to the line of `key` in `section` when found.
    pub fn error_at(&self, section: &str, key: Option<&str>, message: impl std::fmt::Display) -> CliError {
        match key.and_then(|k| locate(&self.source, section, k)) {
            Some(line) => CliError::Config(format!("{}:{line}: [{section}] {message}", self.origin)),
            None if section.is_empty() => CliError::Config(format!("{}: {message}", self.origin)),
            None => CliError::Config(format!("{}: [{section}] {message}", self.origin)),
        }
    }

    fn model_error(&self, section: &str, e: ModelError) -> CliError {
        self.error_at(section, model_key(&e), e)
    }

    pub fn coupling(&self) -> Result<CouplingMap, CliError> {
        let c = &self.config.coupling;
        CouplingMap::new(c.slope_mhz_per_mm, c.valid_range_mm).map_err(|e| self.model_error("coupling", e))
    }

    pub fn field_map(&self) -> Result<MagnonFieldMap, CliError> {
        let f = &self.config.field;
        MagnonFieldMap::new(f.gyromagnetic_mhz_per_mt, ghz_to_mhz(f.omega_ai_ghz))
            .map_err(|e| self.model_error("field", e))
    }

    pub fn overrides(&self) -> Result<Option<CavityOverrides>, CliError> {
        let Some(o) = &self.config.overrides else { return Ok(None) };
        if o.reference && !o.points.is_empty() {
            return Err(self.error_at("overrides", Some("reference"), "give either reference = true or points, not both"));
        }
        if o.reference {
            return Ok(Some(CavityOverrides::reference()));
        }
        if o.points.is_empty() {
            return Ok(None);
        }
        let points = o
            .points
            .iter()
            .map(|p| OverridePoint {
                x: p.x_mm,
                omega_c: ghz_to_mhz(p.omega_c_ghz),
                kappa_int: p.kappa_int_mhz,
            })
            .collect();
        CavityOverrides::new(points)
            .map(Some)
            .map_err(|e| self.error_at("overrides", Some("points"), e))
    }

    /// `[system]` as given, before any displacement is applied.
    pub fn bare_system(&self) -> Result<SystemParams, CliError> {
        let s = &self.config.system;
        let wc = ghz_to_mhz(s.omega_c_ghz);
        let wm = s.omega_m_ghz.map_or(wc, ghz_to_mhz);
        SystemParams::new(wc, wm, s.g_mhz, s.kappa_1_mhz, s.kappa_2_mhz, s.kappa_int_mhz, s.gamma_m_mhz)
            .map_err(|e| self.model_error("system", e))
    }

    /// Apply a sphere displacement to `p` the same way the sweep engine does.
    pub fn displace(&self, p: SystemParams, x: f64, section: &str) -> Result<SystemParams, CliError> {
        let map = self.coupling()?;
        let g = magcpa_core::model::coupling_from_displacement(x, &map).map_err(|e| self.model_error(section, e))?;
        let mut p = p.with_coupling(g).map_err(|e| self.model_error(section, e))?;
        if let Some(table) = self.overrides()? {
            p = table.apply(p, x).map_err(|e| self.model_error(section, e))?;
        }
        p.with_omega_m(p.omega_c()).map_err(|e| self.model_error(section, e))
    }

    /// `[system]` with its displacement (if any) applied.
    pub fn system(&self) -> Result<SystemParams, CliError> {
        let p = self.bare_system()?;
        match self.config.system.displacement_mm {
            Some(x) => self.displace(p, x, "system"),
            None => Ok(p),
        }
    }

    /// `[feed]`, defaulting to in-phase feeds at `q = kappa_1 / kappa_2`.
    pub fn feed(&self, p: &SystemParams) -> Result<FeedConfig, CliError> {
        let (phi_deg, q) = match &self.config.feed {
            Some(f) => (f.delta_phi_deg, f.q),
            None => (0.0, None),
        };
        let q = match q {
            Some(q) => q,
            None if p.kappa_2() > 0.0 => p.kappa_1() / p.kappa_2(),
            None => {
                return Err(self.error_at("feed", None, "kappa_2 = 0: give q explicitly"));
            }
        };
        FeedConfig::new(phi_deg.to_radians(), q).map_err(|e| self.model_error("feed", e))
    }

    pub fn band(&self, range_ghz: Option<[f64; 2]>, centre: f64, section: &str, key: &str) -> Result<(f64, f64), CliError> {
        let (lo, hi) = match range_ghz {
            Some([lo, hi]) => (ghz_to_mhz(lo), ghz_to_mhz(hi)),
            None => (centre - 30.0, centre + 30.0),
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(self.error_at(section, Some(key), format!("empty frequency range [{lo}, {hi}] MHz")));
        }
        Ok((lo, hi))
    }

    pub fn sweep_spec(&self, s: &SweepSection, freq_range: Option<(f64, f64)>) -> Result<SweepSpec, CliError> {
        let section = "sweep";
        let base = self.bare_system()?;
        let positive = |v: f64, key: &str| -> Result<(), CliError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(self.error_at(section, Some(key), format!("{key} must be positive, got {v}")))
            }
        };
        positive(s.step, "step")?;
        let axis = match s.axis {
            AxisKind::MagnonFrequency => {
                SweepAxis::MagnonFrequency(Range::new(ghz_to_mhz(s.start), ghz_to_mhz(s.end), ghz_to_mhz(s.step)))
            }
            AxisKind::Field => SweepAxis::Field(Range::new(s.start, s.end, s.step)),
            AxisKind::Displacement => SweepAxis::Displacement(Range::new(s.start, s.end, s.step)),
            AxisKind::Phase => {
                SweepAxis::Phase(Range::new(s.start.to_radians(), s.end.to_radians(), s.step.to_radians()))
            }
            AxisKind::Ratio => SweepAxis::Ratio(Range::new(s.start, s.end, s.step)),
        };
        let mut spec = SweepSpec::new(axis, Probe::Cavity, base, self.feed(&base)?, s.observable);
        spec.coupling = self.coupling()?;
        spec.field_map = self.field_map()?;
        spec.overrides = self.overrides()?;
        spec.displacement = s.displacement_mm.or(self.config.system.displacement_mm);
        spec.track_resonance = s.track_resonance.unwrap_or(true);
        // the default q follows the displaced rates only through kappa_1/kappa_2,
        // which displacement leaves unchanged
        let centre = spec
            .resolved_base()
            .map_err(|e| self.error_at(section, Some("displacement_mm"), e))?
            .omega_c();
        spec.probe = match s.probe {
            ProbeKind::Cavity => Probe::Cavity,
            ProbeKind::UpperCpa => Probe::UpperCpa,
            ProbeKind::Grid => {
                let (lo, hi) = match freq_range {
                    Some(r) => r,
                    None => self.band(s.probe_range_ghz, centre, section, "probe_range_ghz")?,
                };
                let step = s.probe_step_mhz.unwrap_or(0.02);
                positive(step, "probe_step_mhz")?;
                Probe::Grid(Range::new(lo, hi, step))
            }
        };
        spec.validate().map_err(|e| self.error_at(section, Some("start"), format!("{}: {e}", s.name)))?;
        Ok(spec)
    }

    pub fn noise(&self, s: &SynthSection) -> Result<NoiseModel, CliError> {
        let snr = || {
            s.snr_db
                .ok_or_else(|| self.error_at("synth", Some("noise"), "this noise model needs snr_db"))
        };
        Ok(match s.noise {
            NoiseKind::None => NoiseModel::None,
            NoiseKind::ComplexGaussian => NoiseModel::ComplexGaussian { snr_db: snr()? },
            NoiseKind::Multiplicative => NoiseModel::Multiplicative { snr_db: snr()? },
        })
    }
}
