use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ModelError;

fn finite(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite { name, value })
    }
}

fn rate(name: &'static str, value: f64) -> Result<f64, ModelError> {
    let value = finite(name, value)?;
    if value < 0.0 {
        return Err(ModelError::Negative { name, value });
    }
    Ok(value)
}

/// Physical rates and frequencies of the two-port cavity coupled to one magnon mode.
///
/// Everything is an ordinary frequency in MHz. The total cavity damping
/// `kappa_c = kappa_1 + kappa_2 + kappa_int` is always derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    omega_c: f64,
    omega_m: f64,
    g_m: f64,
    kappa_1: f64,
    kappa_2: f64,
    kappa_int: f64,
    gamma_m: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    omega_c: f64,
    omega_m: f64,
    g_m: f64,
    kappa_1: f64,
    kappa_2: f64,
    kappa_int: f64,
    gamma_m: f64,
}

impl TryFrom<RawParams> for SystemParams {
    type Error = ModelError;

    fn try_from(r: RawParams) -> Result<Self, Self::Error> {
        SystemParams::new(r.omega_c, r.omega_m, r.g_m, r.kappa_1, r.kappa_2, r.kappa_int, r.gamma_m)
    }
}

impl From<SystemParams> for RawParams {
    fn from(p: SystemParams) -> Self {
        RawParams {
            omega_c: p.omega_c,
            omega_m: p.omega_m,
            g_m: p.g_m,
            kappa_1: p.kappa_1,
            kappa_2: p.kappa_2,
            kappa_int: p.kappa_int,
            gamma_m: p.gamma_m,
        }
    }
}

impl SystemParams {
    pub fn new(
        omega_c: f64,
        omega_m: f64,
        g_m: f64,
        kappa_1: f64,
        kappa_2: f64,
        kappa_int: f64,
        gamma_m: f64,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            omega_c: finite("omega_c", omega_c)?,
            omega_m: finite("omega_m", omega_m)?,
            g_m: rate("g_m", g_m)?,
            kappa_1: rate("kappa_1", kappa_1)?,
            kappa_2: rate("kappa_2", kappa_2)?,
            kappa_int: rate("kappa_int", kappa_int)?,
            gamma_m: rate("gamma_m", gamma_m)?,
        })
    }

    /// Bare-cavity values of the reference device: omega_c = 10031.7 MHz,
    /// kappa_1 = 1.72, kappa_2 = 1.39, kappa_int = 1.55, gamma_m = 1.5 MHz,
    /// magnon on resonance and uncoupled.
    pub fn reference() -> Self {
        Self {
            omega_c: 10031.7,
            omega_m: 10031.7,
            g_m: 0.0,
            kappa_1: 1.72,
            kappa_2: 1.39,
            kappa_int: 1.55,
            gamma_m: 1.5,
        }
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    pub fn g_m(&self) -> f64 {
        self.g_m
    }

    pub fn kappa_1(&self) -> f64 {
        self.kappa_1
    }

    pub fn kappa_2(&self) -> f64 {
        self.kappa_2
    }

    pub fn kappa_int(&self) -> f64 {
        self.kappa_int
    }

    pub fn gamma_m(&self) -> f64 {
        self.gamma_m
    }

    pub fn kappa_c(&self) -> f64 {
        self.kappa_1 + self.kappa_2 + self.kappa_int
    }

    /// Everything except port 1: the only combination of kappa_2 and kappa_int
    /// that a port-1 reflection measurement can see.
    pub fn kappa_loss(&self) -> f64 {
        self.kappa_2 + self.kappa_int
    }

    /// Net effective gain on the cavity diagonal when both ports are fed.
    pub fn feed_gain(&self) -> f64 {
        self.kappa_1 + self.kappa_2 - self.kappa_int
    }

    pub fn with_coupling(self, g_m: f64) -> Result<Self, ModelError> {
        Ok(Self {
            g_m: rate("g_m", g_m)?,
            ..self
        })
    }

    pub fn with_omega_m(self, omega_m: f64) -> Result<Self, ModelError> {
        Ok(Self {
            omega_m: finite("omega_m", omega_m)?,
            ..self
        })
    }

    pub fn with_omega_c(self, omega_c: f64) -> Result<Self, ModelError> {
        Ok(Self {
            omega_c: finite("omega_c", omega_c)?,
            ..self
        })
    }

    pub fn with_kappa_int(self, kappa_int: f64) -> Result<Self, ModelError> {
        Ok(Self {
            kappa_int: rate("kappa_int", kappa_int)?,
            ..self
        })
    }

    pub fn with_gamma_m(self, gamma_m: f64) -> Result<Self, ModelError> {
        Ok(Self {
            gamma_m: rate("gamma_m", gamma_m)?,
            ..self
        })
    }

    pub fn with_port_rates(self, kappa_1: f64, kappa_2: f64) -> Result<Self, ModelError> {
        Ok(Self {
            kappa_1: rate("kappa_1", kappa_1)?,
            kappa_2: rate("kappa_2", kappa_2)?,
            ..self
        })
    }
}

/// Relative phase and power ratio of the two coherent feeds.
///
/// `delta_phi` is the phase of feed 1 relative to feed 2, kept in (-pi, pi];
/// `q` is the power ratio feed 1 / feed 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeed", into = "RawFeed")]
pub struct FeedConfig {
    delta_phi: f64,
    q: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeed {
    delta_phi: f64,
    q: f64,
}

impl TryFrom<RawFeed> for FeedConfig {
    type Error = ModelError;

    fn try_from(r: RawFeed) -> Result<Self, Self::Error> {
        FeedConfig::new(r.delta_phi, r.q)
    }
}

impl From<FeedConfig> for RawFeed {
    fn from(f: FeedConfig) -> Self {
        RawFeed {
            delta_phi: f.delta_phi,
            q: f.q,
        }
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_phase(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    let wrapped = phi.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

impl FeedConfig {
    pub fn new(delta_phi: f64, q: f64) -> Result<Self, ModelError> {
        let delta_phi = finite("delta_phi", delta_phi)?;
        let q = finite("q", q)?;
        if q <= 0.0 {
            return Err(ModelError::NonPositive { name: "q", value: q });
        }
        Ok(Self {
            delta_phi: normalize_phase(delta_phi),
            q,
        })
    }

    pub fn delta_phi(&self) -> f64 {
        self.delta_phi
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Complex amplitude of feed 1 when feed 2 has unit amplitude.
    pub fn port1_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.q.sqrt(), -self.delta_phi)
    }

    /// Total injected power in units of the port-2 feed power.
    pub fn input_power(&self) -> f64 {
        1.0 + self.q
    }
}

/// Complex eigenfrequency in MHz. A positive imaginary part means growth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexFrequency {
    pub re: f64,
    pub im: f64,
}

impl ComplexFrequency {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl From<Complex64> for ComplexFrequency {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexFrequency> for Complex64 {
    fn from(f: ComplexFrequency) -> Self {
        Complex64::new(f.re, f.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_rates() {
        assert!(matches!(
            SystemParams::new(1.0, 1.0, -0.1, 1.0, 1.0, 1.0, 1.0),
            Err(ModelError::Negative { name: "g_m", .. })
        ));
        assert!(SystemParams::new(f64::NAN, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn kappa_c_is_derived() {
        let p = SystemParams::reference();
        assert!((p.kappa_c() - 4.66).abs() < 1e-12);
        let p = p.with_kappa_int(1.61).unwrap();
        assert!((p.kappa_c() - 4.72).abs() < 1e-12);
    }

    #[test]
    fn phase_wraps_into_half_open_interval() {
        assert_eq!(normalize_phase(PI), PI);
        assert!((normalize_phase(-PI) - PI).abs() < 1e-15);
        assert!((normalize_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_phase(0.25), 0.25);
    }

    #[test]
    fn feed_rejects_non_positive_ratio() {
        assert!(FeedConfig::new(0.0, 0.0).is_err());
        assert!(FeedConfig::new(0.0, -1.0).is_err());
        let f = FeedConfig::new(0.0, 4.0).unwrap();
        assert_eq!(f.port1_amplitude(), Complex64::new(2.0, 0.0));
        assert_eq!(f.input_power(), 5.0);
    }

    #[test]
    fn serde_validates() {
        let bad = r#"{"omega_c":1,"omega_m":1,"g_m":-1,"kappa_1":1,"kappa_2":1,"kappa_int":1,"gamma_m":1}"#;
        assert!(serde_json::from_str::<SystemParams>(bad).is_err());
        let p = SystemParams::reference();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<SystemParams>(&s).unwrap(), p);
    }
}
