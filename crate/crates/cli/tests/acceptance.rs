//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use magcpa_core::fitting::optimize::{numeric_jacobian, Residuals};
use magcpa_core::fitting::{fit_coupled, synth_spectrum, CoupledProblem, FitParam, NoiseModel, Quantity, ValueKind};
use magcpa_core::model::{
    cavity_mode_frequency, classify_regime, effective_hamiltonian, hamiltonian_eigen, pt_hamiltonian, CavityGeometry,
    CouplingMap, Regime,
};
use magcpa_core::scattering::{cpa_feed_conditions, find_cpa_dips, reduced_output, s_matrix, two_feed_output};
use magcpa_core::sweep::find_exceptional_point;
use magcpa_core::SystemParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn magcpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magcpa")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("magcpa-acceptance-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn figure(name: &str, extra: &[&str]) -> Result<PathBuf, String> {
    let out = scratch(&format!("{name}{}", extra.join("")));
    let mut args = vec!["sweep", "--figure", name, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = magcpa(&args);
    if !o.status.success() {
        return Err(format!("sweep --figure {name} failed: {}", String::from_utf8_lossy(&o.stderr)));
    }
    Ok(out)
}

fn ensure(ok: bool, pass: String, fail: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(pass)
    } else {
        Err(fail())
    }
}

/// Rates chosen so that `kappa_1 + kappa_2 - kappa_int = gamma_m` holds exactly in binary.
fn exact_pt(g: f64) -> SystemParams {
    SystemParams::new(10031.7, 10031.7, g, 1.75, 1.25, 1.5, 1.5).unwrap()
}

fn c1_exceptional_point() -> Check {
    let base = SystemParams::reference();
    let map = CouplingMap::new(1.3, 4.0).map_err(|e| e.to_string())?;
    let x = find_exceptional_point(&base, &map, (0.0, 4.0)).map_err(|e| e.to_string())?;
    ensure(
        (x - 1.1538).abs() <= 1e-4 && (x - 1.2).abs() <= 0.05,
        format!("x_EP = {x:.6} mm"),
        || format!("x_EP = {x} mm"),
    )
}

fn c2_cpa_zeros() -> Check {
    let p = exact_pt(3.9);
    let feed = cpa_feed_conditions(&p).map_err(|e| e.to_string())?;
    let split = (3.9f64 * 3.9 - 1.5 * 1.5).sqrt();
    let mut worst = 0.0f64;
    for w in [p.omega_c() - split, p.omega_c() + split] {
        let out = two_feed_output(w, &p, &feed).map_err(|e| e.to_string())?;
        worst = worst.max(out.total_power / feed.input_power());
    }
    let dips = find_cpa_dips(&p, &feed, (p.omega_c() - 15.0, p.omega_c() + 15.0), 0.02).map_err(|e| e.to_string())?;
    let sep = match dips.as_slice() {
        [a, b] => b.frequency - a.frequency,
        _ => return Err(format!("{} dips found", dips.len())),
    };
    ensure(
        worst < 1e-18 && (sep - 7.2).abs() <= 1e-5,
        format!("max relative output {worst:.2e}, dip separation {sep:.7} MHz"),
        || format!("max relative output {worst:e}, separation {sep}"),
    )
}

fn c3_gap() -> Check {
    let out = figure("1e", &[])?;
    let gap = read_json(&out.join("fig1e_analysis.json"))?["gap"]["separation"]
        .as_f64()
        .ok_or("no gap in analysis")?;
    // one probe step plus the 0.1 MHz rounding of the quoted coupling (2 x 0.05 MHz)
    let tol = 0.02 + 0.1;
    let half = (gap / 2.0 * 10.0).round() / 10.0;
    ensure(
        (gap - 18.4).abs() <= tol && half == 9.2,
        format!("minimum branch separation {gap:.4} MHz (g = {half} MHz)"),
        || format!("separation {gap} MHz"),
    )
}

fn c4_feed_conditions() -> Check {
    let o = magcpa(&["cpa-check", "--out", scratch("cpa").to_str().unwrap()]);
    let j: Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
    let q = j["required_q"].as_f64().ok_or("no q")?;
    let m = j["pt_mismatch_mhz"].as_f64().ok_or("no mismatch")?;
    ensure(
        o.status.success() && (q - 1.2374).abs() < 5e-5 && (m - 0.06).abs() < 1e-9,
        format!("q = {q:.4}, PT mismatch = {m:.4} MHz"),
        || format!("q = {q}, mismatch = {m}"),
    )
}

fn c5_sensitivity() -> Check {
    let out = figure("3c", &[])?;
    let row = |name: &str| -> Result<(f64, f64), String> {
        let j = read_json(&out.join(format!("{name}_analysis.json")))?;
        let r = &j["dynamic_range"][0];
        Ok((r["range_dB"].as_f64().ok_or("no range")?, r["argmin"].as_f64().ok_or("no argmin")?))
    };
    let (r3, arg3) = row("fig3c_x-3")?;
    let (r0, _) = row("fig3c_x0")?;
    ensure(
        r3 > 20.0 && arg3 == 0.0 && r0 < 10.0,
        format!("x=-3 mm: {r3:.1} dB with minimum at {arg3} deg; x=0: {r0:.1} dB"),
        || format!("x=-3: {r3} dB at {arg3} deg; x=0: {r0} dB"),
    )
}

fn c6_regimes() -> Check {
    let got = [9.2, 3.9, 1.0].map(|g| classify_regime(g, 4.66, 1.5));
    ensure(
        got == [Regime::Strong, Regime::Mit, Regime::Weak],
        format!("g = 9.2/3.9/1.0 -> {}/{}/{}", got[0], got[1], got[2]),
        || format!("{got:?}"),
    )
}

fn c7_geometry() -> Check {
    let geom = CavityGeometry::new(44.0, 20.0, 6.0).map_err(|e| e.to_string())?;
    let f1 = cavity_mode_frequency(&geom, 1).map_err(|e| e.to_string())?;
    let f2 = cavity_mode_frequency(&geom, 2).map_err(|e| e.to_string())?;
    let within = |f: f64, target: f64, quoted: f64| (f - target).abs() <= 0.01 && (f - quoted).abs() / quoted <= 0.015;
    ensure(
        within(f1, 8.24, 8.16) && within(f2, 10.13, 10.03),
        format!(
            "n=1 {f1:.4} GHz ({:+.2}% vs 8.16), n=2 {f2:.4} GHz ({:+.2}% vs 10.03)",
            100.0 * (f1 / 8.16 - 1.0),
            100.0 * (f2 / 10.03 - 1.0)
        ),
        || format!("n=1 {f1}, n=2 {f2}"),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> SystemParams {
    let wc = rng.random_range(9900.0..10100.0);
    SystemParams::new(
        wc,
        wc + rng.random_range(-30.0..30.0),
        rng.random_range(0.0..15.0),
        rng.random_range(0.01..5.0),
        rng.random_range(0.0..5.0),
        rng.random_range(0.0..5.0),
        rng.random_range(0.01..5.0),
    )
    .unwrap()
}

fn random_pt(rng: &mut ChaCha8Rng) -> SystemParams {
    let w0 = rng.random_range(9900.0..10100.0);
    let (k1, k2): (f64, f64) = (rng.random_range(0.2..4.0), rng.random_range(0.2..4.0));
    let ki = rng.random_range(0.0..0.9) * (k1 + k2);
    SystemParams::new(w0, w0, rng.random_range(0.0..12.0), k1, k2, ki, k1 + k2 - ki).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + scale)
}

fn c8_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fails = Vec::new();

    let mut bad = 0;
    for _ in 0..10_000 {
        let p = random_params(&mut rng);
        let s = s_matrix(p.omega_c() + rng.random_range(-60.0..60.0), &p).unwrap();
        if s.s21.re.to_bits() != s.s12.re.to_bits() || s.s21.im.to_bits() != s.s12.im.to_bits() {
            bad += 1;
        }
    }
    if bad > 0 {
        fails.push(format!("reciprocity {bad}"));
    }

    let mut counts = BTreeMap::<&str, usize>::new();
    for _ in 0..1000 {
        // scale invariance, near-zero frequencies keep the scaled detunings exact
        let wc = rng.random_range(-20.0..20.0);
        let args = [
            wc,
            wc + rng.random_range(-10.0..10.0),
            rng.random_range(0.0..10.0),
            rng.random_range(0.05..4.0),
            rng.random_range(0.0..4.0),
            rng.random_range(0.0..4.0),
            rng.random_range(0.05..4.0),
        ];
        let lambda = rng.random_range(0.1..10.0);
        let f = wc + rng.random_range(-20.0..20.0);
        let p = SystemParams::new(args[0], args[1], args[2], args[3], args[4], args[5], args[6]).unwrap();
        let l = args.map(|v| lambda * v);
        let q = SystemParams::new(l[0], l[1], l[2], l[3], l[4], l[5], l[6]).unwrap();
        let (a, b) = (s_matrix(f, &p).unwrap(), s_matrix(lambda * f, &q).unwrap());
        for (x, y) in [(a.s11, b.s11), (a.s21, b.s21), (a.s22, b.s22)] {
            if !rel_close(0.0, (x - y).norm(), 1e-12, x.norm().max(y.norm())) {
                *counts.entry("scale invariance").or_default() += 1;
            }
        }

        let p = random_pt(&mut rng);
        let feed = cpa_feed_conditions(&p).unwrap();
        let d = rng.random_range(0.0..30.0);
        let up = two_feed_output(p.omega_c() + d, &p, &feed).unwrap().total_power;
        let down = two_feed_output(p.omega_c() - d, &p, &feed).unwrap().total_power;
        if !rel_close(up, down, 1e-12, up.max(down)) {
            *counts.entry("mirror symmetry").or_default() += 1;
        }

        let f = p.omega_c() + rng.random_range(-30.0..30.0);
        let full = two_feed_output(f, &p, &feed).unwrap();
        let red = reduced_output(f, p.omega_c(), p.gamma_m(), p.g_m(), p.kappa_int(), feed.q());
        for (x, y) in [(full.s1_out, red.s1_out), (full.s2_out, red.s2_out)] {
            if !rel_close(0.0, (x - y).norm(), 1e-12, x.norm().max(y.norm())) {
                *counts.entry("reduced output").or_default() += 1;
            }
        }

        let gamma = rng.random_range(0.1..5.0);
        let w0 = rng.random_range(9900.0..10100.0);
        let e = hamiltonian_eigen(&pt_hamiltonian(w0, rng.random_range(0.0..0.999) * gamma, gamma));
        let [a, b] = e.values;
        if (a.re - b.re).hypot(a.im + b.im) > 1e-12 * w0 || a.im <= 0.0 {
            *counts.entry("conjugate pair").or_default() += 1;
        }

        let p = random_params(&mut rng);
        let h = effective_hamiltonian(&p);
        let e = hamiltonian_eigen(&h);
        let trace = h[0][0] + h[1][1];
        let (sr, si) = (e.values[0].re + e.values[1].re, e.values[0].im + e.values[1].im);
        if (sr - trace.re).hypot(si - trace.im) > 1e-12 * trace.norm() {
            *counts.entry("trace identity").or_default() += 1;
        }
    }
    fails.extend(counts.iter().map(|(k, v)| format!("{k} {v}")));
    ensure(
        fails.is_empty(),
        "reciprocity 10000/10000 bit-exact; scale, mirror, conjugate, reduced, trace 1000/1000 each at 1e-12".into(),
        || format!("failures: {}", fails.join(", ")),
    )
}

fn instance(rng: &mut ChaCha8Rng) -> SystemParams {
    let wc = rng.random_range(9980.0..10060.0);
    SystemParams::new(
        wc,
        wc + rng.random_range(-4.0..4.0),
        rng.random_range(3.0..12.0),
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
        rng.random_range(0.3..2.0),
        rng.random_range(0.5..3.0),
    )
    .unwrap()
}

fn nudge(p: &SystemParams, rng: &mut ChaCha8Rng) -> SystemParams {
    let dc = rng.random_range(-0.5..0.5);
    let dm = rng.random_range(-0.5..0.5);
    let f: [f64; 4] = std::array::from_fn(|_| 1.0 + rng.random_range(-0.1..0.1));
    SystemParams::new(
        p.omega_c() + dc,
        p.omega_m() + dm,
        p.g_m() * f[0],
        p.kappa_1() * f[1],
        p.kappa_2() * f[2],
        p.kappa_int(),
        p.gamma_m() * f[3],
    )
    .unwrap()
}

/// Relative errors of the quantities a reflection fit with `kappa_int` fixed determines.
fn errors(fit: &SystemParams, truth: &SystemParams) -> [f64; 6] {
    let r = |a: f64, b: f64| (a - b).abs() / b.abs();
    [
        r(fit.omega_c(), truth.omega_c()),
        r(fit.omega_m(), truth.omega_m()),
        r(fit.g_m(), truth.g_m()),
        r(fit.gamma_m(), truth.gamma_m()),
        r(fit.kappa_1(), truth.kappa_1()),
        r(fit.kappa_loss(), truth.kappa_loss()),
    ]
}

fn band(p: &SystemParams) -> (f64, f64) {
    (p.omega_c() - 40.0, p.omega_c() + 40.0)
}

fn c9_fit_round_trips() -> Check {
    let worst_noiseless = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + i);
            let truth = instance(&mut rng);
            let guess = nudge(&truth, &mut rng);
            let d = synth_spectrum(&truth, band(&truth), 0.05, Quantity::S11, ValueKind::Complex, NoiseModel::None, 0)
                .unwrap();
            let r = fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap();
            match (r.converged, r.system) {
                (true, Some(s)) => errors(&s, &truth).into_iter().fold(0.0, f64::max),
                _ => f64::INFINITY,
            }
        })
        .reduce(|| 0.0, f64::max);

    let truth = SystemParams::reference().with_coupling(9.2).unwrap();
    let guess = SystemParams::new(10030.5, 10032.5, 8.5, 1.4, 1.3, 1.55, 1.8).unwrap();
    let errs: Vec<[f64; 6]> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let d = synth_spectrum(
                &truth,
                band(&truth),
                0.05,
                Quantity::S11,
                ValueKind::Power,
                NoiseModel::Multiplicative { snr_db: 40.0 },
                seed,
            )
            .unwrap();
            let r = fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap();
            r.system.map_or([f64::INFINITY; 6], |s| errors(&s, &truth))
        })
        .collect();
    let worst_median = (0..6)
        .map(|k| {
            let mut v: Vec<f64> = errs.iter().map(|e| e[k]).collect();
            v.sort_by(f64::total_cmp);
            0.5 * (v[49] + v[50])
        })
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_jac = 0.0f64;
    for _ in 0..50 {
        let truth = instance(&mut rng);
        let at = nudge(&truth, &mut rng);
        for kind in [ValueKind::Complex, ValueKind::Power] {
            let d = synth_spectrum(&truth, band(&truth), 0.1, Quantity::S11, kind, NoiseModel::None, 0).unwrap();
            let problem = CoupledProblem::new(&d, &[FitParam::KappaInt], &truth).unwrap();
            let theta = problem.coordinates(&at);
            let a = numeric_jacobian(&problem, &theta, 1e-4).unwrap();
            let b = numeric_jacobian(&problem, &theta, 1e-5).unwrap();
            for j in 0..problem.n_params() {
                worst_jac = worst_jac.max((a.column(j) - b.column(j)).norm() / b.column(j).norm());
            }
        }
    }
    ensure(
        worst_noiseless < 1e-4 && worst_median < 0.01 && worst_jac <= 1e-3,
        format!(
            "noiseless worst {worst_noiseless:.1e} (200 instances), 40 dB worst median {worst_median:.2e} (100 seeds), Jacobian {worst_jac:.1e}"
        ),
        || format!("noiseless {worst_noiseless:e}, 40 dB median {worst_median:e}, Jacobian {worst_jac:e}"),
    )
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let bytes = fs::read(&path).map_err(|e| e.to_string())?;
        files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn c10_determinism() -> Check {
    let presets = ["1e", "2b", "3a", "3c", "3d", "3e", "s2"];
    let mut total = 0;
    for name in presets {
        let runs = ["1", "1", "4"]
            .iter()
            .map(|threads| snapshot(&figure(name, &["--threads", threads])?))
            .collect::<Result<Vec<_>, String>>()?;
        if runs[0].is_empty() {
            return Err(format!("{name}: no files"));
        }
        if runs[0] != runs[1] {
            return Err(format!("{name}: two runs differ"));
        }
        if runs[0] != runs[2] {
            return Err(format!("{name}: 1 vs 4 threads differ"));
        }
        total += runs[0].len();
    }
    Ok(format!("{} presets, {total} files byte-identical over repeat and 1/4 threads", presets.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 exceptional point", c1_exceptional_point),
        ("2 CPA zeros", c2_cpa_zeros),
        ("3 anti-crossing gap", c3_gap),
        ("4 feed conditions", c4_feed_conditions),
        ("5 sensitivity contrast", c5_sensitivity),
        ("6 regime taxonomy", c6_regimes),
        ("7 cavity geometry", c7_geometry),
        ("8 property suites", c8_properties),
        ("9 fit round trips", c9_fit_round_trips),
        ("10 determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    let prefix = format!("magcpa-acceptance-{}-", std::process::id());
    if let Ok(entries) = fs::read_dir(std::env::temp_dir()) {
        for e in entries.flatten() {
            if e.file_name().to_string_lossy().starts_with(&prefix) {
                let _ = fs::remove_dir_all(e.path());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
