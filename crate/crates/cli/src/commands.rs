use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use magcpa_core::fitting::{fit_coupled, fit_lorentzian, lorentzian, synth_spectrum, FitResult, SpectrumDataset};
use magcpa_core::grid;
use magcpa_core::model::{classify_regime, cpa_eigenfrequencies, pt_residuals, Regime, SystemParams};
use magcpa_core::scattering::{find_cpa_dips, find_reflection_dips, s_matrix, two_feed_output, Dip};
use magcpa_core::sweep::{
    self, anticrossing_gap, dynamic_range_db, find_exceptional_point, minima_trace, render_heatmap, render_lines,
    BranchGap, LineSeries, MinimaTrace, Style, SweepAxis, SweepResult, DB_CONVENTION,
};
use magcpa_core::FeedConfig;
use serde::Serialize;
use serde_json::json;

use crate::config::{ghz_to_mhz, Analysis, FitModel, Loaded, SweepSection};
use crate::error::CliError;

/// A file to be written once every output has been computed.
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

/// Result of a command: files for the output directory and text for stdout.
#[derive(Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub stdout: Option<String>,
    /// Set when the command completed but a numerical failure must be reported
    /// through the exit status.
    pub failure: Option<CliError>,
}

pub struct Options {
    pub freq_range: Option<(f64, f64)>,
    pub seed: Option<u64>,
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    if artifacts.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, &a.contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn to_db(p: f64) -> f64 {
    sweep::to_db(p, 1.0)
}

fn style(title: &str, x: &str, y: &str) -> Style {
    Style {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        ..Style::default()
    }
}

// ---------------------------------------------------------------- spectrum

pub fn spectrum(cfg: &Loaded, opts: &Options) -> Result<Outcome, CliError> {
    let p = cfg.system()?;
    let sec = &cfg.config.spectrum;
    let (lo, hi) = match opts.freq_range {
        Some(r) => r,
        None => cfg.band(sec.freq_range_ghz, p.omega_c(), "spectrum", "freq_range_ghz")?,
    };
    if !(sec.step_mhz.is_finite() && sec.step_mhz > 0.0) {
        return Err(cfg.error_at("spectrum", Some("step_mhz"), "step_mhz must be positive"));
    }
    let feed = if sec.two_feed { Some(cfg.feed(&p)?) } else { None };
    let freqs = grid::uniform(lo, hi, sec.step_mhz);

    let mut csv = format!("# {DB_CONVENTION}\n");
    csv.push_str("freq_GHz,freq_MHz,s11_re,s11_im,s21_re,s21_im,s22_re,s22_im,s11_power_dB,s21_power_dB");
    if feed.is_some() {
        csv.push_str(",total_power,total_power_dB");
    }
    csv.push('\n');
    let mut s11 = Vec::with_capacity(freqs.len());
    let mut s21 = Vec::with_capacity(freqs.len());
    let mut s22 = Vec::with_capacity(freqs.len());
    let mut total = Vec::new();
    for &f in &freqs {
        let s = s_matrix(f, &p).map_err(|e| CliError::Numerical(e.to_string()))?;
        let _ = write!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            f / 1e3,
            f,
            s.s11.re,
            s.s11.im,
            s.s21.re,
            s.s21.im,
            s.s22.re,
            s.s22.im,
            to_db(s.s11.norm_sqr()),
            to_db(s.s21.norm_sqr())
        );
        if let Some(feed) = &feed {
            let t = two_feed_output(f, &p, feed)
                .map_err(|e| CliError::Numerical(e.to_string()))?
                .total_power;
            let _ = write!(csv, ",{},{}", t, sweep::to_db(t, feed.input_power()));
            total.push(t);
        }
        csv.push('\n');
        s11.push([s.s11.re, s.s11.im]);
        s21.push([s.s21.re, s.s21.im]);
        s22.push([s.s22.re, s.s22.im]);
    }

    let numerical = |e: magcpa_core::scattering::ScatteringError| CliError::Numerical(e.to_string());
    let reflection_dips = find_reflection_dips(&p, (lo, hi), sec.step_mhz).map_err(numerical)?;
    let cpa_dips: Option<Vec<Dip>> = match &feed {
        Some(feed) => Some(find_cpa_dips(&p, feed, (lo, hi), sec.step_mhz).map_err(numerical)?),
        None => None,
    };
    let report = json!({
        "system": p,
        "feed": feed,
        "db_convention": DB_CONVENTION,
        "frequencies_MHz": freqs,
        "s11": s11,
        "s21": s21,
        "s22": s22,
        "total_power": feed.as_ref().map(|_| &total),
        "reflection_dips": reflection_dips,
        "cpa_dips": cpa_dips,
    });

    let mut series = vec![
        LineSeries {
            label: "|S11|^2".into(),
            x: freqs.clone(),
            y: s11.iter().map(|z| to_db(z[0] * z[0] + z[1] * z[1])).collect(),
        },
        LineSeries {
            label: "|S21|^2".into(),
            x: freqs.clone(),
            y: s21.iter().map(|z| to_db(z[0] * z[0] + z[1] * z[1])).collect(),
        },
    ];
    if let Some(feed) = &feed {
        series.push(LineSeries {
            label: "total output".into(),
            x: freqs.clone(),
            y: total.iter().map(|&t| sweep::to_db(t, feed.input_power())).collect(),
        });
    }
    let mut st = style("S-parameter spectrum", "frequency (MHz)", "power (dB)");
    st.db_range = Some((-80.0, 5.0));
    let svg = render_lines(&series, &st)?;

    let out = &cfg.config.output;
    let mut artifacts = Vec::new();
    if out.csv {
        artifacts.push(Artifact::new("spectrum.csv", csv));
    }
    if out.json {
        artifacts.push(Artifact::new("spectrum.json", pretty(&report)));
    }
    if out.svg {
        artifacts.push(Artifact::new("spectrum.svg", svg));
    }
    Ok(Outcome {
        artifacts,
        ..Outcome::default()
    })
}

// ---------------------------------------------------------------- sweep

fn axis_label(axis: &SweepAxis) -> &'static str {
    match axis {
        SweepAxis::MagnonFrequency(_) => "magnon frequency (MHz)",
        SweepAxis::Field(_) => "B0 (mT)",
        SweepAxis::Displacement(_) => "displacement x (mm)",
        SweepAxis::Phase(_) => "phase difference (deg)",
        SweepAxis::Ratio(_) => "power ratio q",
    }
}

/// Sweep values in the units of the configuration surface.
fn display_values(result: &SweepResult) -> Vec<f64> {
    match result.metadata.spec.axis {
        SweepAxis::Phase(_) => result.sweep_values.iter().map(|v| v.to_degrees()).collect(),
        _ => result.sweep_values.clone(),
    }
}

#[derive(Serialize)]
struct RowRange {
    #[serde(rename = "frequency_MHz")]
    frequency_mhz: f64,
    #[serde(rename = "range_dB")]
    range_db: f64,
    argmin: f64,
}

#[derive(Serialize, Default)]
struct SweepAnalysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<BranchGap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    minima: Option<MinimaTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dynamic_range: Option<Vec<RowRange>>,
}

fn run_sweep(cfg: &Loaded, s: &SweepSection, opts: &Options, artifacts: &mut Vec<Artifact>) -> Result<Option<LineSeries>, CliError> {
    let spec = cfg.sweep_spec(s, opts.freq_range)?;
    let result = sweep::run(&spec)?;
    let out = &cfg.config.output;
    let title = s.title.clone().unwrap_or_else(|| s.name.clone());
    let xs = display_values(&result);

    if s.grid_output && out.csv {
        artifacts.push(Artifact::new(format!("{}.csv", s.name), sweep::to_csv(&result)));
    }
    if s.grid_output && out.json {
        let mut text = sweep::to_json(&result)?;
        text.push('\n');
        artifacts.push(Artifact::new(format!("{}.json", s.name), text));
    }
    if s.grid_output && out.svg && result.frequencies.len() > 1 {
        let st = style(&title, axis_label(&spec.axis), "probe frequency (MHz)");
        artifacts.push(Artifact::new(format!("{}.svg", s.name), render_heatmap(&result, &st)?));
    }

    let mut analysis = SweepAnalysis::default();
    for a in &s.analysis {
        match a {
            Analysis::Gap => {
                analysis.gap = Some(anticrossing_gap(&result).ok_or_else(|| {
                    CliError::Numerical(format!("{}: no column shows two separated branches", s.name))
                })?);
            }
            Analysis::Minima => {
                let trace = minima_trace(&result)?;
                if out.csv {
                    artifacts.push(Artifact::new(format!("{}_minima.csv", s.name), sweep::minima_to_csv(&trace)));
                }
                if out.svg {
                    let series = [LineSeries {
                        label: "minimum".into(),
                        x: xs.clone(),
                        y: trace.entries.iter().map(|e| e.value_db).collect(),
                    }];
                    let st = style(&format!("{title}: minima"), axis_label(&spec.axis), "minimum output (dB)");
                    artifacts.push(Artifact::new(format!("{}_minima.svg", s.name), render_lines(&series, &st)?));
                }
                analysis.minima = Some(trace);
            }
            Analysis::DynamicRange => {
                let rows = (0..result.frequencies.len())
                    .filter_map(|r| {
                        let (range, argmin) = dynamic_range_db(&result, r)?;
                        let argmin = match spec.axis {
                            SweepAxis::Phase(_) => argmin.to_degrees(),
                            _ => argmin,
                        };
                        Some(RowRange {
                            frequency_mhz: result.frequencies[r],
                            range_db: range,
                            argmin,
                        })
                    })
                    .collect();
                analysis.dynamic_range = Some(rows);
            }
        }
    }
    if !s.analysis.is_empty() && out.json {
        artifacts.push(Artifact::new(format!("{}_analysis.json", s.name), pretty(&analysis)));
    }

    Ok((result.frequencies.len() == 1).then(|| LineSeries {
        label: format!("{} @ {:.4} MHz", s.name, result.frequencies[0]),
        x: xs,
        y: (0..result.sweep_values.len()).map(|c| result.db(c, 0)).collect(),
    }))
}

fn synth_and_fit(cfg: &Loaded, stem: &str, opts: &Options, artifacts: &mut Vec<Artifact>) -> Result<Option<FitResult>, CliError> {
    let Some(sec) = &cfg.config.synth else { return Ok(None) };
    let data = synthesize(cfg, opts)?;
    let out = &cfg.config.output;
    if out.csv {
        artifacts.push(Artifact::new(format!("{stem}.csv"), data.to_csv()));
    }
    let fit = fit_dataset(cfg, &data)?;
    if out.json {
        artifacts.push(Artifact::new(format!("{stem}_fit.json"), pretty(&fit)));
    }
    if out.svg {
        let freqs = data.frequencies().to_vec();
        let measured: Vec<f64> = data.values().power().into_iter().map(to_db).collect();
        let model: Vec<f64> = match (&fit.system, fit.model.as_str()) {
            (Some(p), _) => freqs
                .iter()
                .map(|&f| {
                    let s = s_matrix(f, p).map(|s| match sec.quantity {
                        magcpa_core::fitting::Quantity::S11 => s.s11.norm_sqr(),
                        magcpa_core::fitting::Quantity::S21 => s.s21.norm_sqr(),
                    });
                    s.map_or(f64::NAN, to_db)
                })
                .collect(),
            (None, _) => {
                let v = |n: &str| fit.value(n).unwrap_or(f64::NAN);
                freqs
                    .iter()
                    .map(|&f| to_db(lorentzian(f, v("omega_c"), v("kappa_c"), v("amplitude"), v("baseline"))))
                    .collect()
            }
        };
        let series = [
            LineSeries {
                label: "data".into(),
                x: freqs.clone(),
                y: measured,
            },
            LineSeries {
                label: "fit".into(),
                x: freqs,
                y: model,
            },
        ];
        let st = style(&format!("{stem}: {} fit", fit.model), "frequency (MHz)", "power (dB)");
        artifacts.push(Artifact::new(format!("{stem}.svg"), render_lines(&series, &st)?));
    }
    Ok(Some(fit))
}

fn overrides_table(cfg: &Loaded) -> Result<Option<String>, CliError> {
    let Some(table) = cfg.overrides()? else { return Ok(None) };
    let range = cfg.coupling()?.valid_range;
    let mut csv = String::from("x_mm,omega_c_MHz,kappa_int_MHz,kappa_c_MHz\n");
    let p = cfg.bare_system()?;
    for x in grid::uniform(-range, range, 0.5) {
        let (wc, ki) = table.at(x);
        let _ = writeln!(csv, "{x},{wc},{ki},{}", p.kappa_1() + p.kappa_2() + ki);
    }
    Ok(Some(csv))
}

pub fn sweep_cmd(cfg: &Loaded, opts: &Options) -> Result<Outcome, CliError> {
    let stem = cfg.config.figure.clone().unwrap_or_else(|| "sweep".into());
    if cfg.config.sweep.is_empty() && cfg.config.synth.is_none() {
        return Err(cfg.error_at("", None, "nothing to do: add [[sweep]] or [synth] sections"));
    }
    let mut artifacts = Vec::new();
    let mut lines = Vec::new();
    for s in &cfg.config.sweep {
        if let Some(l) = run_sweep(cfg, s, opts, &mut artifacts)? {
            lines.push((s, l));
        }
    }
    if !lines.is_empty() && cfg.config.output.svg {
        let axis_lbl = cfg.sweep_spec(lines[0].0, opts.freq_range).map(|s| axis_label(&s.axis))?;
        let series: Vec<LineSeries> = lines.into_iter().map(|(_, l)| l).collect();
        let st = style(&stem, axis_lbl, "total output (dB)");
        artifacts.push(Artifact::new(format!("{stem}.svg"), render_lines(&series, &st)?));
    }
    let fit = synth_and_fit(cfg, &stem, opts, &mut artifacts)?;
    if cfg.config.output.overrides_table {
        if let Some(csv) = overrides_table(cfg)? {
            artifacts.push(Artifact::new(format!("{stem}_overrides.csv"), csv));
        }
    }
    let failure = fit
        .filter(|f| !f.converged)
        .map(|f| CliError::Numerical(format!("fit did not converge: {}", f.message)));
    Ok(Outcome {
        artifacts,
        stdout: None,
        failure,
    })
}

// ---------------------------------------------------------------- ep

pub fn ep(cfg: &Loaded) -> Result<Outcome, CliError> {
    let base = cfg.bare_system()?;
    let map = cfg.coupling()?;
    let [a, b] = cfg.config.ep.bracket_mm;
    let x = find_exceptional_point(&base, &map, (a, b))?;
    let g = map.slope * x.abs();
    let report = json!({
        "x_ep_mm": x,
        "mirror_x_ep_mm": -x,
        "g_at_ep_mhz": g,
        "gamma_m_mhz": base.gamma_m(),
        "residual_mhz": g - base.gamma_m(),
        "slope_mhz_per_mm": map.slope,
        "bracket_mm": [a, b],
    });
    Ok(Outcome {
        artifacts: vec![Artifact::new("ep.json", pretty(&report))],
        stdout: Some(pretty(&report)),
        failure: None,
    })
}

// ---------------------------------------------------------------- cpa-check

#[derive(Serialize)]
pub struct CpaCheck {
    pub omega_c_mhz: f64,
    pub omega_m_mhz: f64,
    pub g_mhz: f64,
    pub gamma_m_mhz: f64,
    pub kappa_c_mhz: f64,
    /// `omega_c - omega_m`
    pub detuning_mhz: f64,
    /// `kappa_1 + kappa_2 - kappa_int - gamma_m`
    pub pt_mismatch_mhz: f64,
    pub required_delta_phi_deg: f64,
    pub required_q: f64,
    pub configured_delta_phi_deg: Option<f64>,
    pub configured_q: Option<f64>,
    pub regime: Regime,
    pub phase: &'static str,
    pub cpa_frequencies_mhz: Vec<f64>,
    pub warnings: Vec<String>,
}

const PT_TOL: f64 = 1e-9;

pub fn cpa_check_report(cfg: &Loaded) -> Result<CpaCheck, CliError> {
    let p = cfg.system()?;
    let (detuning, mismatch) = pt_residuals(&p);
    if p.kappa_2() == 0.0 {
        return Err(cfg.error_at("system", Some("kappa_2_mhz"), "kappa_2 = 0: no CPA power ratio exists"));
    }
    let required_q = p.kappa_1() / p.kappa_2();
    let configured: Option<FeedConfig> = match cfg.config.feed {
        Some(_) => Some(cfg.feed(&p)?),
        None => None,
    };
    let mut warnings = Vec::new();
    let unbroken = p.g_m() > p.gamma_m();
    let phase = if unbroken {
        "unbroken"
    } else if p.g_m() == p.gamma_m() {
        "exceptional_point"
    } else {
        "broken"
    };
    if !unbroken {
        warnings.push(format!(
            "g_m = {} MHz <= gamma_m = {} MHz: PT symmetry is broken, no real CPA frequencies",
            p.g_m(),
            p.gamma_m()
        ));
    }
    if detuning.abs() > PT_TOL {
        warnings.push(format!("cavity and magnon detuned by {detuning} MHz"));
    }
    if mismatch.abs() > PT_TOL {
        warnings.push(format!("kappa_1 + kappa_2 - kappa_int - gamma_m = {mismatch} MHz (PT balance requires 0)"));
    }
    if let Some(f) = &configured {
        if f.delta_phi().abs() > PT_TOL {
            warnings.push(format!("configured phase difference {} deg, CPA requires 0", f.delta_phi().to_degrees()));
        }
        if (f.q() - required_q).abs() > PT_TOL * required_q {
            warnings.push(format!("configured power ratio {} differs from kappa_1/kappa_2 = {required_q}", f.q()));
        }
    }
    let cpa = if unbroken {
        let (hi, lo) = cpa_eigenfrequencies(p.omega_c(), p.g_m(), p.gamma_m()).map_err(|e| CliError::Config(e.to_string()))?;
        vec![lo.re, hi.re]
    } else {
        Vec::new()
    };
    Ok(CpaCheck {
        omega_c_mhz: p.omega_c(),
        omega_m_mhz: p.omega_m(),
        g_mhz: p.g_m(),
        gamma_m_mhz: p.gamma_m(),
        kappa_c_mhz: p.kappa_c(),
        detuning_mhz: detuning,
        pt_mismatch_mhz: mismatch,
        required_delta_phi_deg: 0.0,
        required_q,
        configured_delta_phi_deg: configured.map(|f| f.delta_phi().to_degrees()),
        configured_q: configured.map(|f| f.q()),
        regime: classify_regime(p.g_m(), p.kappa_c(), p.gamma_m()),
        phase,
        cpa_frequencies_mhz: cpa,
        warnings,
    })
}

pub fn cpa_check(cfg: &Loaded) -> Result<Outcome, CliError> {
    let report = pretty(&cpa_check_report(cfg)?);
    Ok(Outcome {
        artifacts: vec![Artifact::new("cpa_check.json", report.clone())],
        stdout: Some(report),
        failure: None,
    })
}

// ---------------------------------------------------------------- fit and synth

fn fit_dataset(cfg: &Loaded, data: &SpectrumDataset) -> Result<FitResult, CliError> {
    Ok(match cfg.config.fit.model {
        FitModel::Lorentzian => fit_lorentzian(data),
        FitModel::Coupled => {
            let guess: SystemParams = cfg.system()?;
            fit_coupled(data, &cfg.config.fit.fixed, &guess)?
        }
    })
}

pub fn fit(cfg: &Loaded, data_path: &Path) -> Result<Outcome, CliError> {
    let file = fs::File::open(data_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", data_path.display())))?;
    let data = SpectrumDataset::from_csv(file, cfg.config.fit.quantity)
        .map_err(|e| CliError::Input(format!("{}: {e}", data_path.display())))?;
    let result = fit_dataset(cfg, &data)?;
    let text = pretty(&result);
    let failure = (!result.converged).then(|| CliError::Numerical(format!("fit did not converge: {}", result.message)));
    Ok(Outcome {
        artifacts: vec![Artifact::new("fit.json", text.clone())],
        stdout: Some(text),
        failure,
    })
}

fn synthesize(cfg: &Loaded, opts: &Options) -> Result<SpectrumDataset, CliError> {
    let Some(sec) = &cfg.config.synth else {
        return Err(cfg.error_at("", None, "missing [synth] section"));
    };
    let p = cfg.system()?;
    let band = match opts.freq_range {
        Some(r) => r,
        None => {
            let [lo, hi] = sec.band_ghz;
            (ghz_to_mhz(lo), ghz_to_mhz(hi))
        }
    };
    let seed = opts.seed.or(cfg.config.seed).unwrap_or(0);
    synth_spectrum(&p, band, sec.step_mhz, sec.quantity, sec.kind, cfg.noise(sec)?, seed)
        .map_err(|e| cfg.error_at("synth", Some("band_ghz"), e))
}

pub fn synth(cfg: &Loaded, opts: &Options) -> Result<Outcome, CliError> {
    let data = synthesize(cfg, opts)?;
    Ok(Outcome {
        artifacts: vec![Artifact::new("synth.csv", data.to_csv())],
        ..Outcome::default()
    })
}
