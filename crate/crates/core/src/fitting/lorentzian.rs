use std::collections::BTreeMap;

use super::dataset::SpectrumDataset;
use super::optimize::{self, Residuals, Settings};
use super::{method_name, natural_covariance, theta_covariance, FitResult, ParamEstimate};

/// `A κ² / ((ω − ω_c)² + κ²) + B`, with `κ` the half-width at half-maximum.
pub fn lorentzian(freq: f64, omega_c: f64, kappa: f64, amplitude: f64, baseline: f64) -> f64 {
    let d = freq - omega_c;
    amplitude * kappa * kappa / (d * d + kappa * kappa) + baseline
}

struct Problem<'a> {
    freqs: &'a [f64],
    power: Vec<f64>,
    sqrt_w: Option<Vec<f64>>,
    center0: f64,
}

impl Problem<'_> {
    fn unpack(&self, t: &[f64]) -> [f64; 4] {
        [self.center0 + t[0], t[1].exp(), t[2], t[3]]
    }
}

impl Residuals for Problem<'_> {
    fn n_params(&self) -> usize {
        4
    }

    fn residuals(&self, t: &[f64]) -> Option<Vec<f64>> {
        let [wc, k, a, b] = self.unpack(t);
        if !(k.is_finite() && k > 0.0) {
            return None;
        }
        Some(
            self.freqs
                .iter()
                .zip(&self.power)
                .enumerate()
                .map(|(i, (&f, &y))| {
                    let r = lorentzian(f, wc, k, a, b) - y;
                    self.sqrt_w.as_ref().map_or(r, |w| w[i] * r)
                })
                .collect(),
        )
    }
}

/// Baseline from the band edges, centre and amplitude from the largest
/// excursion, width from the half-depth crossings around it.
fn initial_guess(freqs: &[f64], y: &[f64]) -> [f64; 4] {
    let n = y.len();
    let edge = (n / 20).max(1);
    let baseline = (y[..edge].iter().sum::<f64>() + y[n - edge..].iter().sum::<f64>()) / (2 * edge) as f64;
    let (imax, _) = y
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v - baseline).abs()))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let amplitude = y[imax] - baseline;
    let half = amplitude.abs() / 2.0;
    let above = |i: usize| (y[i] - baseline).abs() >= half;
    let mut left = imax;
    while left > 0 && above(left - 1) {
        left -= 1;
    }
    let mut right = imax;
    while right + 1 < n && above(right + 1) {
        right += 1;
    }
    let span = freqs[n - 1] - freqs[0];
    let step = span / (n - 1) as f64;
    let hwhm = ((freqs[right] - freqs[left]) / 2.0).max(step / 2.0);
    let hwhm = if amplitude == 0.0 { span / 10.0 } else { hwhm };
    [freqs[imax], hwhm, amplitude, baseline]
}

/// Least-squares Lorentzian fit to the power in `data`.
///
/// Parameters are reported as `omega_c`, `kappa_c` (half-width), `amplitude`
/// and `baseline`. The result is flagged non-converged when the optimizer
/// stalls, when the normal matrix at the optimum is singular (flat data), when
/// the centre leaves the data span, or when the span covers fewer than three
/// full linewidths.
pub fn fit_lorentzian(data: &SpectrumDataset) -> FitResult {
    let freqs = data.frequencies();
    let power = data.values().power();
    let g = initial_guess(freqs, &power);
    let problem = Problem {
        freqs,
        power,
        sqrt_w: data.weights().map(|w| w.iter().map(|x| x.sqrt()).collect()),
        center0: g[0],
    };
    let settings = Settings::default();
    let theta0 = [0.0, g[1].ln(), g[2], g[3]];
    let out = optimize::minimize(&problem, &theta0, &settings);
    let est = problem.unpack(&out.theta);

    let mut converged = out.converged;
    let mut message = out.message.clone();
    let cov = out
        .jtj
        .as_ref()
        .and_then(|jtj| theta_covariance(jtj, out.cost, out.n_residuals, &settings));
    if cov.is_none() {
        converged = false;
        message = "parameters are not determined by the data (singular normal matrix)".into();
    }
    let (lo, hi) = (freqs[0], freqs[freqs.len() - 1]);
    if converged && !(lo..=hi).contains(&est[0]) {
        converged = false;
        message = format!("fitted centre {} MHz lies outside the data span", est[0]);
    }
    if converged && hi - lo < 3.0 * 2.0 * est[1] {
        converged = false;
        message = format!("data span {} MHz covers fewer than three linewidths", hi - lo);
    }

    // d(value)/d(theta): the width is log-parameterized
    let scale = [1.0, est[1], 1.0, 1.0];
    let names = ["omega_c", "kappa_c", "amplitude", "baseline"];
    let parameters = names
        .iter()
        .enumerate()
        .map(|(i, name)| ParamEstimate {
            name: (*name).to_string(),
            value: est[i],
            std_error: cov.as_ref().map(|c| c[(i, i)].max(0.0).sqrt() * scale[i]),
            fixed: false,
        })
        .collect();

    let mut derived = BTreeMap::new();
    derived.insert("fwhm".to_string(), 2.0 * est[1]);
    FitResult {
        model: "lorentzian".into(),
        quantity: data.quantity(),
        n_points: data.len(),
        parameters,
        covariance: cov.as_ref().map(|c| natural_covariance(c, &scale)),
        derived,
        rss: out.cost,
        initial_rss: out.initial_cost,
        iterations: out.iterations,
        converged,
        authoritative: converged,
        method: method_name(out.method).into(),
        message,
        fixed: Vec::new(),
        system: None,
    }
}
