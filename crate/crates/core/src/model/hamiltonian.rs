use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexFrequency, ModelError, SystemParams};

/// Dense 2x2 complex matrix in the (photon, magnon) basis, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

/// Relative eigenvalue gap below which two eigenvalues are treated as coalesced.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Effective non-Hermitian Hamiltonian of the doubly-fed cavity-magnon system.
///
/// The cavity diagonal carries the feed-induced gain `+i(kappa_1 + kappa_2 - kappa_int)`,
/// the magnon diagonal its damping `-i gamma_m`.
pub fn effective_hamiltonian(p: &SystemParams) -> Matrix2 {
    let g = Complex64::new(p.g_m(), 0.0);
    [
        [Complex64::new(p.omega_c(), p.feed_gain()), g],
        [g, Complex64::new(p.omega_m(), -p.gamma_m())],
    ]
}

/// Passive (singly-probed) Hamiltonian: both modes only lose energy.
pub fn loaded_hamiltonian(p: &SystemParams) -> Matrix2 {
    let g = Complex64::new(p.g_m(), 0.0);
    [
        [Complex64::new(p.omega_c(), -p.kappa_c()), g],
        [g, Complex64::new(p.omega_m(), -p.gamma_m())],
    ]
}

/// The PT-symmetric reduced form `[[w0 + i gamma, g], [g, w0 - i gamma]]`.
pub fn pt_hamiltonian(omega_0: f64, g_m: f64, gamma_m: f64) -> Matrix2 {
    let g = Complex64::new(g_m, 0.0);
    [
        [Complex64::new(omega_0, gamma_m), g],
        [g, Complex64::new(omega_0, -gamma_m)],
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigen2 {
    /// Ordered by descending real part, then descending imaginary part.
    pub values: [ComplexFrequency; 2],
    /// Unit-norm eigenvectors. A single vector when the matrix is defective.
    pub vectors: Vec<[Complex64; 2]>,
    pub degenerate: bool,
}

fn order(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    if a.re > b.re || (a.re == b.re && a.im >= b.im) {
        (a, b)
    } else {
        (b, a)
    }
}

fn norm2(v: &[Complex64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

fn unit(v: [Complex64; 2]) -> [Complex64; 2] {
    let n = norm2(&v);
    [v[0] / n, v[1] / n]
}

/// Closed-form eigen-decomposition of a 2x2 complex matrix.
///
/// Works in the frame shifted by half the trace, where the matrix is
/// `[[alpha, b], [c, -alpha]]` and the eigenvalues are `±sqrt(alpha² + bc)`;
/// this keeps the residuals relative to the splitting rather than to the
/// (large) carrier frequency.
pub fn hamiltonian_eigen(h: &Matrix2) -> Eigen2 {
    let [[a, b], [c, d]] = *h;
    let trace = a + d;
    let mean = trace * 0.5;
    let alpha = (a - d) * 0.5;
    let s = (alpha * alpha + b * c).sqrt();
    let (hi, lo) = order(s, -s);
    let values = [ComplexFrequency::from(mean + hi), ComplexFrequency::from(mean + lo)];

    let gap = (2.0 * s).norm();
    let degenerate = gap < DEGENERACY_TOL * trace.norm().max(1.0);

    let vector_for = |shifted: Complex64| -> Option<[Complex64; 2]> {
        let v1 = [b, shifted - alpha];
        let v2 = [shifted + alpha, c];
        let (n1, n2) = (norm2(&v1), norm2(&v2));
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        (n > 0.0).then(|| unit(v))
    };

    let vectors = if degenerate {
        match vector_for(Complex64::new(0.0, 0.0)) {
            Some(v) => vec![v],
            // scalar multiple of the identity: every vector is an eigenvector
            None => vec![
                [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            ],
        }
    } else {
        // s != 0 here, so at least one candidate is non-zero for each root
        [hi, lo]
            .iter()
            .filter_map(|&z| vector_for(z))
            .collect()
    };

    Eigen2 {
        values,
        vectors,
        degenerate,
    }
}

/// CPA frequencies `omega_0 ± sqrt(g² - gamma²)` of the PT-symmetric Hamiltonian.
///
/// Real pair when `g >= gamma` (unbroken phase), conjugate pair
/// `omega_0 ± i sqrt(gamma² - g²)` otherwise. Ordered like [`Eigen2::values`].
pub fn cpa_eigenfrequencies(
    omega_0: f64,
    g_m: f64,
    gamma_m: f64,
) -> Result<(ComplexFrequency, ComplexFrequency), ModelError> {
    for (name, v) in [("omega_0", omega_0), ("g_m", g_m), ("gamma_m", gamma_m)] {
        if !v.is_finite() {
            return Err(ModelError::NonFinite { name, value: v });
        }
    }
    for (name, v) in [("g_m", g_m), ("gamma_m", gamma_m)] {
        if v < 0.0 {
            return Err(ModelError::Negative { name, value: v });
        }
    }
    if g_m >= gamma_m {
        let split = ((g_m - gamma_m) * (g_m + gamma_m)).sqrt();
        Ok((
            ComplexFrequency::new(omega_0 + split, 0.0),
            ComplexFrequency::new(omega_0 - split, 0.0),
        ))
    } else {
        let rate = ((gamma_m - g_m) * (gamma_m + g_m)).sqrt();
        Ok((
            ComplexFrequency::new(omega_0, rate),
            ComplexFrequency::new(omega_0, -rate),
        ))
    }
}

/// Distance from the exact PT point: `(omega_c - omega_m, kappa_1 + kappa_2 - kappa_int - gamma_m)`.
pub fn pt_residuals(p: &SystemParams) -> (f64, f64) {
    (p.omega_c() - p.omega_m(), p.feed_gain() - p.gamma_m())
}
