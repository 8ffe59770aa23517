//! Fit round trips against synthetic spectra.

use magcpa_core::fitting::optimize::{numeric_jacobian, Residuals};
use magcpa_core::fitting::{
    fit_coupled, fit_lorentzian, synth_spectrum, CoupledProblem, FitParam, FitResult, NoiseModel, Quantity,
    SpectrumDataset, ValueKind,
};
use magcpa_core::SystemParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn bare_cavity() -> SystemParams {
    SystemParams::new(10031.7, 10031.7, 0.0, 1.72, 1.39, 1.55, 1.5).unwrap()
}

/// g = 9.2, gamma = 1.5, kappa_1 = 1.72, kappa_loss = 2.94 at zero detuning.
fn coupled_truth() -> SystemParams {
    SystemParams::reference().with_coupling(9.2).unwrap()
}

fn reflection_band(p: &SystemParams) -> (f64, f64) {
    (p.omega_c() - 40.0, p.omega_c() + 40.0)
}

/// Relative errors of the quantities a reflection fit with `kappa_int`
/// fixed can recover.
fn reflection_errors(fit: &FitResult, truth: &SystemParams) -> [f64; 6] {
    let s = fit.system.unwrap();
    [
        rel(s.omega_c(), truth.omega_c()),
        rel(s.omega_m(), truth.omega_m()),
        rel(s.g_m(), truth.g_m()),
        rel(s.gamma_m(), truth.gamma_m()),
        rel(s.kappa_1(), truth.kappa_1()),
        rel(s.kappa_loss(), truth.kappa_loss()),
    ]
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

#[test]
fn lorentzian_one_percent_noise_median_within_one_percent() {
    let errs: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let d = synth_spectrum(
                &bare_cavity(),
                (10001.7, 10061.7),
                0.05,
                Quantity::S21,
                ValueKind::Power,
                NoiseModel::Multiplicative { snr_db: 40.0 },
                seed,
            )
            .unwrap();
            let r = fit_lorentzian(&d);
            (
                rel(r.value("kappa_c").unwrap(), 4.66),
                rel(r.value("omega_c").unwrap(), 10031.7),
            )
        })
        .collect();
    let k = median(errs.iter().map(|e| e.0).collect());
    let w = median(errs.iter().map(|e| e.1).collect());
    assert!(k < 0.01, "median kappa_c error {k}");
    assert!(w < 0.01, "median omega_c error {w}");
}

#[test]
fn coupled_noiseless_power_recovery() {
    let truth = coupled_truth();
    let d = synth_spectrum(&truth, reflection_band(&truth), 0.05, Quantity::S11, ValueKind::Power, NoiseModel::None, 0)
        .unwrap();
    let guess = SystemParams::new(10030.5, 10032.5, 8.5, 1.4, 1.3, 1.55, 1.8).unwrap();
    let r = fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap();
    assert!(r.converged, "{}", r.message);
    let e = reflection_errors(&r, &truth);
    assert!(max_of(&e) < 1e-4, "{e:?}");
    assert!((r.derived["kappa_loss"] - 2.94).abs() / 2.94 < 1e-4);
}

fn random_instance(rng: &mut ChaCha8Rng) -> SystemParams {
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

fn perturb(p: &SystemParams, rng: &mut ChaCha8Rng) -> SystemParams {
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

#[test]
fn noiseless_round_trip_over_random_instances() {
    let failures: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
            let truth = random_instance(&mut rng);
            let guess = perturb(&truth, &mut rng);
            let d = synth_spectrum(
                &truth,
                reflection_band(&truth),
                0.05,
                Quantity::S11,
                ValueKind::Complex,
                NoiseModel::None,
                0,
            )
            .unwrap();
            let r = fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap();
            let e = reflection_errors(&r, &truth);
            (!r.converged || max_of(&e) >= 1e-4).then(|| format!("instance {i}: {truth:?} -> {e:?} ({})", r.message))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn forty_db_median_recovery_within_one_percent() {
    let truth = coupled_truth();
    let guess = SystemParams::new(10030.5, 10032.5, 8.5, 1.4, 1.3, 1.55, 1.8).unwrap();
    let errs: Vec<[f64; 6]> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let d = synth_spectrum(
                &truth,
                reflection_band(&truth),
                0.05,
                Quantity::S11,
                ValueKind::Power,
                NoiseModel::Multiplicative { snr_db: 40.0 },
                seed,
            )
            .unwrap();
            reflection_errors(&fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap(), &truth)
        })
        .collect();
    for k in 0..6 {
        let m = median(errs.iter().map(|e| e[k]).collect());
        assert!(m < 0.01, "parameter {k}: median error {m}");
    }
}

#[test]
fn swapped_coupling_and_damping_guess() {
    let truth = coupled_truth();
    let d = synth_spectrum(&truth, reflection_band(&truth), 0.05, Quantity::S11, ValueKind::Power, NoiseModel::None, 0)
        .unwrap();
    let swapped = SystemParams::new(10031.7, 10031.7, 1.5, 1.72, 1.39, 1.55, 9.2).unwrap();
    let r = fit_coupled(&d, &[FitParam::KappaInt], &swapped).unwrap();
    if r.converged {
        let e = reflection_errors(&r, &truth);
        assert!(max_of(&e) < 1e-4, "converged away from the truth: {e:?}");
    }
    assert_eq!(r.authoritative, r.converged);
}

#[test]
fn jacobian_consistent_across_step_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let truth = random_instance(&mut rng);
        let at = perturb(&truth, &mut rng);
        for kind in [ValueKind::Complex, ValueKind::Power] {
            let d = synth_spectrum(&truth, reflection_band(&truth), 0.1, Quantity::S11, kind, NoiseModel::None, 0)
                .unwrap();
            let problem = CoupledProblem::new(&d, &[FitParam::KappaInt], &truth).unwrap();
            let theta = problem.coordinates(&at);
            let a = numeric_jacobian(&problem, &theta, 1e-4).unwrap();
            let b = numeric_jacobian(&problem, &theta, 1e-5).unwrap();
            for j in 0..problem.n_params() {
                let diff = (a.column(j) - b.column(j)).norm();
                let scale = b.column(j).norm();
                assert!(diff <= 1e-3 * scale, "column {j}: {diff} vs {scale}");
            }
        }
    }
}

#[test]
fn fit_never_increases_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..20u64 {
        let truth = random_instance(&mut rng);
        let guess = perturb(&truth, &mut rng);
        let d = synth_spectrum(
            &truth,
            reflection_band(&truth),
            0.1,
            Quantity::S11,
            ValueKind::Power,
            NoiseModel::Multiplicative { snr_db: 25.0 },
            seed,
        )
        .unwrap();
        let r = fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap();
        assert!(r.rss <= r.initial_rss, "{} > {}", r.rss, r.initial_rss);
    }
}

#[test]
fn fixing_a_true_value_does_not_hurt() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let truth = random_instance(&mut rng);
        let guess = perturb(&truth, &mut rng);
        let d = synth_spectrum(&truth, reflection_band(&truth), 0.05, Quantity::S11, ValueKind::Complex, NoiseModel::None, 0)
            .unwrap();
        let free = fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap();
        let base_err = max_of(&reflection_errors(&free, &truth));
        for extra in [FitParam::Coupling, FitParam::Gamma, FitParam::Kappa1, FitParam::OmegaM] {
            let anchored = match extra {
                FitParam::Coupling => guess.with_coupling(truth.g_m()).unwrap(),
                FitParam::Gamma => guess.with_gamma_m(truth.gamma_m()).unwrap(),
                FitParam::Kappa1 => guess.with_port_rates(truth.kappa_1(), guess.kappa_2()).unwrap(),
                _ => guess.with_omega_m(truth.omega_m()).unwrap(),
            };
            let r = fit_coupled(&d, &[FitParam::KappaInt, extra], &anchored).unwrap();
            let err = max_of(&reflection_errors(&r, &truth));
            assert!(err <= base_err.max(1e-9), "fixing {extra} raised error {base_err} -> {err}");
        }
    }
}

#[test]
fn error_falls_as_snr_rises() {
    let truth = coupled_truth();
    let guess = SystemParams::new(10030.5, 10032.5, 8.5, 1.4, 1.3, 1.55, 1.8).unwrap();
    let medians: Vec<f64> = [20.0, 30.0, 40.0, 50.0, 60.0]
        .iter()
        .map(|&snr| {
            let errs: Vec<f64> = (0..40u64)
                .into_par_iter()
                .map(|seed| {
                    let d = synth_spectrum(
                        &truth,
                        reflection_band(&truth),
                        0.05,
                        Quantity::S11,
                        ValueKind::Complex,
                        NoiseModel::ComplexGaussian { snr_db: snr },
                        seed,
                    )
                    .unwrap();
                    max_of(&reflection_errors(&fit_coupled(&d, &[FitParam::KappaInt], &guess).unwrap(), &truth))
                })
                .collect();
            median(errs)
        })
        .collect();
    for w in medians.windows(2) {
        assert!(w[1] < w[0], "{medians:?}");
    }
}

#[test]
fn csv_round_trip_preserves_fit() {
    let truth = coupled_truth();
    let d = synth_spectrum(&truth, reflection_band(&truth), 0.1, Quantity::S11, ValueKind::Complex, NoiseModel::None, 0)
        .unwrap();
    let back = SpectrumDataset::from_csv(d.to_csv().as_bytes(), Quantity::S21).unwrap();
    assert_eq!(back.quantity(), Quantity::S11);
    let r = fit_coupled(&back, &[FitParam::KappaInt], &truth).unwrap();
    assert!(max_of(&reflection_errors(&r, &truth)) < 1e-6);
}
