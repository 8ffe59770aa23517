use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dataset::{Quantity, SpectrumDataset, Values};
use super::optimize::{self, Outcome, Residuals, Settings};
use super::{method_name, natural_covariance, theta_covariance, FitError, FitResult, ParamEstimate};
use crate::grid;
use crate::model::SystemParams;
use crate::scattering::s_matrix;

/// Smallest starting value for a log-parameterized rate.
const MIN_RATE_GUESS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    OmegaC,
    OmegaM,
    #[serde(rename = "g_m")]
    Coupling,
    #[serde(rename = "gamma_m")]
    Gamma,
    #[serde(rename = "kappa_1")]
    Kappa1,
    #[serde(rename = "kappa_2")]
    Kappa2,
    KappaInt,
}

impl FitParam {
    pub const ALL: [FitParam; 7] = [
        FitParam::OmegaC,
        FitParam::OmegaM,
        FitParam::Coupling,
        FitParam::Gamma,
        FitParam::Kappa1,
        FitParam::Kappa2,
        FitParam::KappaInt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::OmegaC => "omega_c",
            FitParam::OmegaM => "omega_m",
            FitParam::Coupling => "g_m",
            FitParam::Gamma => "gamma_m",
            FitParam::Kappa1 => "kappa_1",
            FitParam::Kappa2 => "kappa_2",
            FitParam::KappaInt => "kappa_int",
        }
    }

    fn is_rate(self) -> bool {
        !matches!(self, FitParam::OmegaC | FitParam::OmegaM)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitParam {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim();
        FitParam::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| FitError::InvalidData(format!("unknown fit parameter {key:?}")))
    }
}

fn to_array(p: &SystemParams) -> [f64; 7] {
    [
        p.omega_c(),
        p.omega_m(),
        p.g_m(),
        p.gamma_m(),
        p.kappa_1(),
        p.kappa_2(),
        p.kappa_int(),
    ]
}

fn from_array(v: &[f64; 7]) -> Option<SystemParams> {
    SystemParams::new(v[0], v[1], v[2], v[4], v[5], v[6], v[3]).ok()
}

/// Free parameters in canonical order, after the identifiability check.
fn free_parameters(quantity: Quantity, fixed: &[FitParam]) -> Result<Vec<FitParam>, FitError> {
    let free: Vec<FitParam> = FitParam::ALL.into_iter().filter(|p| !fixed.contains(p)).collect();
    let is_free = |p: FitParam| free.contains(&p);
    if free.is_empty() {
        return Err(FitError::NotIdentifiable("every parameter is fixed".into()));
    }
    match quantity {
        Quantity::S11 if is_free(FitParam::Kappa2) && is_free(FitParam::KappaInt) => {
            Err(FitError::NotIdentifiable(
                "port-1 reflection depends on kappa_2 and kappa_int only through their sum kappa_loss; \
                 fix one of them"
                    .into(),
            ))
        }
        Quantity::S21
            if is_free(FitParam::Kappa1) && is_free(FitParam::Kappa2) && is_free(FitParam::KappaInt) =>
        {
            Err(FitError::NotIdentifiable(
                "transmission fixes kappa_1*kappa_2 and the total cavity rate, not all three rates; \
                 fix one of kappa_1, kappa_2, kappa_int"
                    .into(),
            ))
        }
        _ => Ok(free),
    }
}

/// The coupled-mode least-squares problem in optimizer coordinates: free
/// frequencies as offsets from the anchor, free rates as logarithms.
pub struct CoupledProblem<'a> {
    data: &'a SpectrumDataset,
    sqrt_w: Option<Vec<f64>>,
    base: [f64; 7],
    free: Vec<FitParam>,
}

impl<'a> CoupledProblem<'a> {
    pub fn new(data: &'a SpectrumDataset, fixed: &[FitParam], anchor: &SystemParams) -> Result<Self, FitError> {
        Ok(Self {
            data,
            sqrt_w: data.weights().map(|w| w.iter().map(|x| x.sqrt()).collect()),
            base: to_array(anchor),
            free: free_parameters(data.quantity(), fixed)?,
        })
    }

    pub fn free(&self) -> &[FitParam] {
        &self.free
    }

    /// Parameters at optimizer coordinates `t`, if they form a valid set.
    pub fn params_at(&self, t: &[f64]) -> Option<SystemParams> {
        from_array(&self.values(t))
    }

    /// Optimizer coordinates of `p`.
    pub fn coordinates(&self, p: &SystemParams) -> Vec<f64> {
        self.theta_of(&to_array(p))
    }

    fn values(&self, t: &[f64]) -> [f64; 7] {
        let mut v = self.base;
        for (p, &x) in self.free.iter().zip(t) {
            let i = p.index();
            v[i] = if p.is_rate() { x.exp() } else { self.base[i] + x };
        }
        v
    }

    /// Optimizer coordinates of `p` relative to this problem's anchor.
    fn theta_of(&self, p: &[f64; 7]) -> Vec<f64> {
        self.free
            .iter()
            .map(|q| {
                let i = q.index();
                if q.is_rate() {
                    p[i].max(MIN_RATE_GUESS).ln()
                } else {
                    p[i] - self.base[i]
                }
            })
            .collect()
    }

    fn model(&self, p: &SystemParams, f: f64) -> Option<Complex64> {
        let s = s_matrix(f, p).ok()?;
        Some(match self.data.quantity() {
            Quantity::S11 => s.s11,
            Quantity::S21 => s.s21,
        })
    }
}

impl Residuals for CoupledProblem<'_> {
    fn n_params(&self) -> usize {
        self.free.len()
    }

    fn residuals(&self, t: &[f64]) -> Option<Vec<f64>> {
        let p = from_array(&self.values(t))?;
        let freqs = self.data.frequencies();
        let w = |i: usize| self.sqrt_w.as_ref().map_or(1.0, |w| w[i]);
        match self.data.values() {
            Values::Complex(v) => {
                let mut out = Vec::with_capacity(2 * v.len());
                for (i, (&f, y)) in freqs.iter().zip(v).enumerate() {
                    let d = (self.model(&p, f)? - y) * w(i);
                    out.push(d.re);
                    out.push(d.im);
                }
                Some(out)
            }
            Values::Power(v) => freqs
                .iter()
                .zip(v)
                .enumerate()
                .map(|(i, (&f, y))| Some((self.model(&p, f)?.norm_sqr() - y) * w(i)))
                .collect(),
        }
    }
}

/// Starting point read off the spectrum.
///
/// Centre frequency from the largest excursion from the band-edge baseline,
/// or the midpoint of the two largest excursions when there are two, in which
/// case `g_m` is half their separation. The half-width at half-depth `w` of the
/// deepest feature sets the loss scale: a single feature is taken as the
/// cavity line (`κ_c = w`); a split pair shares the loss (`κ_c + γ_m = 2w`,
/// split 3:1). Free cavity rates are rescaled from `base` in proportion;
/// parameters listed in `fixed` keep their `base` values.
pub fn guess_from_spectrum(data: &SpectrumDataset, base: &SystemParams, fixed: &[FitParam]) -> SystemParams {
    let freqs = data.frequencies();
    let y = data.values().power();
    let n = y.len();
    let edge = (n / 20).max(1);
    let baseline = (y[..edge].iter().sum::<f64>() + y[n - edge..].iter().sum::<f64>()) / (2 * edge) as f64;
    let dev: Vec<f64> = y.iter().map(|v| (v - baseline).abs()).collect();
    let max_dev = dev.iter().copied().fold(0.0, f64::max);
    if max_dev.is_nan() || max_dev <= 0.0 {
        return *base;
    }
    let neg: Vec<f64> = dev.iter().map(|d| -d).collect();
    let mut peaks: Vec<usize> = grid::local_minima(&neg)
        .into_iter()
        .filter(|&i| dev[i] >= 0.25 * max_dev)
        .collect();
    peaks.sort_by(|&a, &b| dev[b].total_cmp(&dev[a]));
    peaks.truncate(2);
    if peaks.is_empty() {
        let imax = dev.iter().position(|&d| d == max_dev).unwrap_or(0);
        peaks.push(imax);
    }

    let deepest = peaks[0];
    let half = dev[deepest] / 2.0;
    let mut left = deepest;
    while left > 0 && dev[left - 1] >= half {
        left -= 1;
    }
    let mut right = deepest;
    while right + 1 < n && dev[right + 1] >= half {
        right += 1;
    }
    let step = (freqs[n - 1] - freqs[0]) / (n - 1) as f64;
    let w = ((freqs[right] - freqs[left]) / 2.0).max(step);

    let mut v = to_array(base);
    let set = |v: &mut [f64; 7], p: FitParam, x: f64| {
        if !fixed.contains(&p) && x.is_finite() {
            v[p.index()] = x;
        }
    };
    let (centre, kappa_c) = if peaks.len() == 2 {
        let (a, b) = (freqs[peaks[0]], freqs[peaks[1]]);
        set(&mut v, FitParam::Coupling, (a - b).abs() / 2.0);
        set(&mut v, FitParam::Gamma, 0.5 * w);
        ((a + b) / 2.0, 1.5 * w)
    } else {
        (freqs[deepest], w)
    };
    set(&mut v, FitParam::OmegaC, centre);
    set(&mut v, FitParam::OmegaM, centre);

    // rescale the free cavity rates so that their total matches kappa_c
    let rates = [FitParam::Kappa1, FitParam::Kappa2, FitParam::KappaInt];
    let fixed_sum: f64 = rates.iter().filter(|p| fixed.contains(p)).map(|p| v[p.index()]).sum();
    let free_sum: f64 = rates.iter().filter(|p| !fixed.contains(p)).map(|p| v[p.index()]).sum();
    let target = (kappa_c - fixed_sum).max(MIN_RATE_GUESS);
    if free_sum > 0.0 {
        for p in rates.iter().filter(|p| !fixed.contains(p)) {
            v[p.index()] *= target / free_sum;
        }
    }
    from_array(&v).unwrap_or(*base)
}

/// Coupled-mode fit of `data` with the parameters in `fixed` held at their
/// `guess` values.
///
/// Complex data are fitted on real and imaginary parts, power data on `|S|²`,
/// each residual scaled by the square root of its weight. Rates are
/// log-parameterized so every visited point is a valid [`SystemParams`].
/// The optimizer starts from `guess` and from [`guess_from_spectrum`], and the
/// lower residual wins.
pub fn fit_coupled(data: &SpectrumDataset, fixed: &[FitParam], guess: &SystemParams) -> Result<FitResult, FitError> {
    fit_coupled_with(data, fixed, guess, &Settings::default())
}

pub(crate) fn fit_coupled_with(
    data: &SpectrumDataset,
    fixed: &[FitParam],
    guess: &SystemParams,
    settings: &Settings,
) -> Result<FitResult, FitError> {
    let problem = CoupledProblem::new(data, fixed, guess)?;
    let free = problem.free.clone();

    let user_start = problem.theta_of(&problem.base);
    let helper = to_array(&guess_from_spectrum(data, guess, fixed));
    let helper_start = problem.theta_of(&helper);

    let first = optimize::minimize(&problem, &user_start, settings);
    let best = if helper_start != user_start {
        let second = optimize::minimize(&problem, &helper_start, settings);
        pick(first, second)
    } else {
        first
    };
    // the descent property is stated against the caller's guess
    let initial_rss = optimize::residual_cost(&problem, &user_start);

    let est = problem.values(&best.theta);
    let system = from_array(&est).ok_or_else(|| FitError::InvalidData("optimizer left the valid domain".into()))?;
    let mut converged = best.converged;
    let mut message = best.message.clone();
    let cov = best
        .jtj
        .as_ref()
        .and_then(|jtj| theta_covariance(jtj, best.cost, best.n_residuals, settings));
    if cov.is_none() {
        converged = false;
        message = "free parameters are not determined by the data (singular normal matrix)".into();
    }

    let scale: Vec<f64> = free.iter().map(|p| if p.is_rate() { est[p.index()] } else { 1.0 }).collect();
    let parameters = FitParam::ALL
        .into_iter()
        .map(|p| {
            let k = free.iter().position(|q| *q == p);
            ParamEstimate {
                name: p.name().into(),
                value: est[p.index()],
                std_error: k.and_then(|k| cov.as_ref().map(|c| c[(k, k)].max(0.0).sqrt() * scale[k])),
                fixed: k.is_none(),
            }
        })
        .collect();

    let mut derived = BTreeMap::new();
    derived.insert("kappa_loss".into(), system.kappa_loss());
    derived.insert("kappa_c".into(), system.kappa_c());

    Ok(FitResult {
        model: match data.quantity() {
            Quantity::S11 => "coupled_reflection".into(),
            Quantity::S21 => "coupled_transmission".into(),
        },
        quantity: data.quantity(),
        n_points: data.len(),
        parameters,
        covariance: cov.as_ref().map(|c| natural_covariance(c, &scale)),
        derived,
        rss: best.cost,
        initial_rss,
        iterations: best.iterations,
        converged,
        authoritative: converged,
        method: method_name(best.method).into(),
        message,
        fixed: FitParam::ALL
            .into_iter()
            .filter(|p| fixed.contains(p))
            .map(|p| p.name().to_string())
            .collect(),
        system: Some(system),
    })
}

fn pick(a: Outcome, b: Outcome) -> Outcome {
    match (a.converged, b.converged) {
        (true, false) if a.cost <= b.cost * (1.0 + 1e-9) => a,
        (false, true) if b.cost <= a.cost * (1.0 + 1e-9) => b,
        _ if b.cost < a.cost => b,
        _ => a,
    }
}
