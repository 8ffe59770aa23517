//! Physical parameterization of the cavity-magnon system.
//!
//! All frequencies and rates are ordinary frequencies in MHz. Positive
//! imaginary parts of eigenfrequencies mean growth.

mod geometry;
mod hamiltonian;
mod maps;
mod params;
mod regime;

use thiserror::Error;

pub use geometry::{cavity_mode_frequency, mode_field_profile, CavityGeometry, SPEED_OF_LIGHT};
pub use hamiltonian::{
    cpa_eigenfrequencies, effective_hamiltonian, hamiltonian_eigen, loaded_hamiltonian,
    pt_hamiltonian, pt_residuals, Eigen2, Matrix2, DEGENERACY_TOL,
};
pub use maps::{
    coupling_from_displacement, magnon_frequency, CavityOverrides, CouplingMap, MagnonFieldMap,
    OverridePoint,
};
pub use params::{normalize_phase, ComplexFrequency, FeedConfig, SystemParams};
pub use regime::{classify_regime, Regime};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("displacement {x} mm outside the valid window [-{limit}, {limit}] mm")]
    DisplacementOutOfRange { x: f64, limit: f64 },
    #[error("position {x} mm outside the cavity (|x| <= {half_length} mm)")]
    OutsideCavity { x: f64, half_length: f64 },
    #[error("mode index must be >= 1, got {0}")]
    InvalidModeIndex(u32),
    #[error("invalid override table: {0}")]
    InvalidOverrides(String),
}
