use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Interior dimensions of a rectangular cavity, in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub edge_x: f64,
    pub edge_y: f64,
    pub edge_z: f64,
}

impl CavityGeometry {
    pub fn new(edge_x: f64, edge_y: f64, edge_z: f64) -> Result<Self, ModelError> {
        for (name, v) in [("edge_x", edge_x), ("edge_y", edge_y), ("edge_z", edge_z)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::NonPositive { name, value: v });
            }
        }
        Ok(Self { edge_x, edge_y, edge_z })
    }

    /// The 44 x 20 x 6 mm³ reference cavity.
    pub fn reference() -> Self {
        Self {
            edge_x: 44.0,
            edge_y: 20.0,
            edge_z: 6.0,
        }
    }

    fn sorted(&self) -> [f64; 3] {
        let mut e = [self.edge_x, self.edge_y, self.edge_z];
        e.sort_by(f64::total_cmp);
        e
    }

    /// Edge along which the TE_10n mode has its `n` half-waves.
    pub fn long_edge(&self) -> f64 {
        self.sorted()[2]
    }

    /// Transverse edge carrying the single half-wave.
    pub fn transverse_edge(&self) -> f64 {
        self.sorted()[1]
    }
}

fn check_mode(n: u32) -> Result<(), ModelError> {
    if n < 1 {
        return Err(ModelError::InvalidModeIndex(n));
    }
    Ok(())
}

/// Resonance of the TE_10n mode in GHz: `(c/2) sqrt((1/a)² + (n/d)²)`.
pub fn cavity_mode_frequency(geom: &CavityGeometry, n: u32) -> Result<f64, ModelError> {
    check_mode(n)?;
    let a = geom.transverse_edge() * 1e-3;
    let d = geom.long_edge() * 1e-3;
    let hz = 0.5 * SPEED_OF_LIGHT * ((1.0 / a).powi(2) + (f64::from(n) / d).powi(2)).sqrt();
    Ok(hz * 1e-9)
}

/// Normalized standing-wave amplitude of TE_10n along the long edge.
///
/// `x` is measured in mm from the cavity center. The profile is
/// `cos(n pi x / d - (n - 1) pi / 2)`: an antinode at the center for odd `n`,
/// a node for even `n`.
pub fn mode_field_profile(x: f64, geom: &CavityGeometry, n: u32) -> Result<f64, ModelError> {
    check_mode(n)?;
    let d = geom.long_edge();
    if !x.is_finite() || x.abs() > 0.5 * d {
        return Err(ModelError::OutsideCavity { x, half_length: 0.5 * d });
    }
    let n = f64::from(n);
    Ok((n * PI * x / d - (n - 1.0) * PI / 2.0).cos())
}
