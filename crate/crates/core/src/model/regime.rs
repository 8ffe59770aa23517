use std::fmt;

use serde::{Deserialize, Serialize};

/// Coupling regime set by the ordering of `g_m`, `kappa_c` and `gamma_m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Strong,
    /// Magnetically induced transparency: `kappa_c > g_m > gamma_m`.
    Mit,
    Purcell,
    Weak,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Strong => "strong",
            Regime::Mit => "mit",
            Regime::Purcell => "purcell",
            Regime::Weak => "weak",
        };
        f.write_str(s)
    }
}

/// Ties go to the weaker regime, so `g_m == gamma_m` (the exceptional point)
/// is never counted as Strong or MIT.
pub fn classify_regime(g_m: f64, kappa_c: f64, gamma_m: f64) -> Regime {
    match (g_m > gamma_m, g_m > kappa_c) {
        (true, true) => Regime::Strong,
        (true, false) => Regime::Mit,
        (false, true) => Regime::Purcell,
        (false, false) => Regime::Weak,
    }
}
