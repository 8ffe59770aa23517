//! Coupled-mode toolkit for a two-port microwave cavity coupled to a magnon mode.
//!
//! - [`model`]: parameters, effective Hamiltonians, eigenfrequencies, regimes, geometry.
//! - [`scattering`]: S-parameters, two-feed output and coherent perfect absorption.
//! - [`sweep`]: parameter sweeps, exceptional-point search, export and plotting.
//! - [`fitting`]: Lorentzian and coupled-mode fits, synthetic spectra.

pub mod fitting;
pub mod grid;
pub mod model;
pub mod scattering;
pub mod sweep;

pub use model::{ComplexFrequency, FeedConfig, SystemParams};

/// Toolkit version recorded in exported metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
