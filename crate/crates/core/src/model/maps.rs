use serde::{Deserialize, Serialize};

use super::{ModelError, SystemParams};

/// Linear Kittel-mode dispersion `nu_m = gamma_e |B0| + omega_ai`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnonFieldMap {
    /// MHz per mT.
    pub gyromagnetic_ratio: f64,
    /// MHz.
    pub omega_ai: f64,
}

impl Default for MagnonFieldMap {
    fn default() -> Self {
        Self {
            gyromagnetic_ratio: 28.0,
            omega_ai: 0.0,
        }
    }
}

impl MagnonFieldMap {
    pub fn new(gyromagnetic_ratio: f64, omega_ai: f64) -> Result<Self, ModelError> {
        if !gyromagnetic_ratio.is_finite() || gyromagnetic_ratio <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "gyromagnetic_ratio",
                value: gyromagnetic_ratio,
            });
        }
        if !omega_ai.is_finite() {
            return Err(ModelError::NonFinite {
                name: "omega_ai",
                value: omega_ai,
            });
        }
        Ok(Self {
            gyromagnetic_ratio,
            omega_ai,
        })
    }

    /// Inverse of [`magnon_frequency`], for relabelling an omega_m axis in mT.
    pub fn field_for(&self, omega_m: f64) -> f64 {
        (omega_m - self.omega_ai) / self.gyromagnetic_ratio
    }
}

/// Magnon frequency in MHz for a static field `b0` in mT.
pub fn magnon_frequency(b0: f64, map: &MagnonFieldMap) -> Result<f64, ModelError> {
    if !b0.is_finite() {
        return Err(ModelError::NonFinite { name: "b0", value: b0 });
    }
    if b0 < 0.0 {
        return Err(ModelError::Negative { name: "b0", value: b0 });
    }
    Ok(map.gyromagnetic_ratio * b0 + map.omega_ai)
}

/// Coupling strength as a function of the sphere displacement from the cavity center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingMap {
    /// MHz per mm.
    pub slope: f64,
    /// Largest |x| (mm) for which the linear relation holds.
    pub valid_range: f64,
}

impl Default for CouplingMap {
    fn default() -> Self {
        Self {
            slope: 1.3,
            valid_range: 4.0,
        }
    }
}

impl CouplingMap {
    pub fn new(slope: f64, valid_range: f64) -> Result<Self, ModelError> {
        for (name, v) in [("slope", slope), ("valid_range", valid_range)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::NonPositive { name, value: v });
            }
        }
        Ok(Self { slope, valid_range })
    }
}

/// `g_m = slope |x|`, valid for `|x| <= valid_range`.
pub fn coupling_from_displacement(x: f64, map: &CouplingMap) -> Result<f64, ModelError> {
    if !x.is_finite() || x.abs() > map.valid_range {
        return Err(ModelError::DisplacementOutOfRange {
            x,
            limit: map.valid_range,
        });
    }
    Ok(map.slope * x.abs())
}

/// One row of the sphere-perturbation table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridePoint {
    /// mm
    pub x: f64,
    /// MHz
    pub omega_c: f64,
    /// MHz
    pub kappa_int: f64,
}

/// Displacement-dependent cavity frequency and intrinsic loss caused by the
/// inserted sphere, linearly interpolated between table rows and held
/// constant beyond the ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<OverridePoint>", into = "Vec<OverridePoint>")]
pub struct CavityOverrides {
    points: Vec<OverridePoint>,
}

impl TryFrom<Vec<OverridePoint>> for CavityOverrides {
    type Error = ModelError;

    fn try_from(points: Vec<OverridePoint>) -> Result<Self, Self::Error> {
        CavityOverrides::new(points)
    }
}

impl From<CavityOverrides> for Vec<OverridePoint> {
    fn from(o: CavityOverrides) -> Self {
        o.points
    }
}

impl CavityOverrides {
    pub fn new(mut points: Vec<OverridePoint>) -> Result<Self, ModelError> {
        if points.is_empty() {
            return Err(ModelError::InvalidOverrides("table is empty".into()));
        }
        for p in &points {
            if !(p.x.is_finite() && p.omega_c.is_finite() && p.kappa_int.is_finite()) {
                return Err(ModelError::InvalidOverrides(format!("non-finite row at x = {}", p.x)));
            }
            if p.kappa_int < 0.0 {
                return Err(ModelError::InvalidOverrides(format!(
                    "negative kappa_int at x = {}",
                    p.x
                )));
            }
        }
        points.sort_by(|a, b| a.x.total_cmp(&b.x));
        if points.windows(2).any(|w| w[0].x == w[1].x) {
            return Err(ModelError::InvalidOverrides("duplicate displacement".into()));
        }
        Ok(Self { points })
    }

    /// Sphere-induced shifts of the reference device: omega_c from 10024.2 MHz at
    /// the center to 10023.0 MHz at |x| = 4 mm, kappa_int from 1.55 to 1.61 MHz.
    pub fn reference() -> Self {
        let edge = |x| OverridePoint {
            x,
            omega_c: 10023.0,
            kappa_int: 1.61,
        };
        Self {
            points: vec![
                edge(-4.0),
                OverridePoint {
                    x: 0.0,
                    omega_c: 10024.2,
                    kappa_int: 1.55,
                },
                edge(4.0),
            ],
        }
    }

    pub fn points(&self) -> &[OverridePoint] {
        &self.points
    }

    /// `(omega_c, kappa_int)` at displacement `x`.
    pub fn at(&self, x: f64) -> (f64, f64) {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if x <= first.x {
            return (first.omega_c, first.kappa_int);
        }
        if x >= last.x {
            return (last.omega_c, last.kappa_int);
        }
        let i = pts.partition_point(|p| p.x <= x);
        let (lo, hi) = (pts[i - 1], pts[i]);
        let t = (x - lo.x) / (hi.x - lo.x);
        (
            lo.omega_c + t * (hi.omega_c - lo.omega_c),
            lo.kappa_int + t * (hi.kappa_int - lo.kappa_int),
        )
    }

    pub fn apply(&self, p: SystemParams, x: f64) -> Result<SystemParams, ModelError> {
        let (omega_c, kappa_int) = self.at(x);
        p.with_omega_c(omega_c)?.with_kappa_int(kappa_int)
    }
}
