//! Nonlinear least squares: Levenberg-Marquardt with a central-difference
//! Jacobian, and a Nelder-Mead simplex used when the Jacobian is too
//! ill-conditioned to trust.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Residual function. `None` marks an inadmissible parameter vector.
pub trait Residuals {
    fn n_params(&self) -> usize;
    fn residuals(&self, theta: &[f64]) -> Option<Vec<f64>>;
}

impl<F> Residuals for (usize, F)
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    fn n_params(&self) -> usize {
        self.0
    }

    fn residuals(&self, theta: &[f64]) -> Option<Vec<f64>> {
        (self.1)(theta)
    }
}

pub fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Sum of squared residuals, infinite where the model cannot be evaluated.
pub fn residual_cost<R: Residuals + ?Sized>(problem: &R, theta: &[f64]) -> f64 {
    match problem.residuals(theta) {
        Some(r) if r.iter().all(|v| v.is_finite()) => sum_sq(&r),
        _ => f64::INFINITY,
    }
}

/// Central-difference Jacobian with per-parameter step `rel_step * max(|theta_j|, 1)`.
/// Rows are residuals, columns parameters.
pub fn numeric_jacobian<R: Residuals + ?Sized>(problem: &R, theta: &[f64], rel_step: f64) -> Option<DMatrix<f64>> {
    let n = theta.len();
    let mut cols = Vec::with_capacity(n);
    let mut probe = theta.to_vec();
    for j in 0..n {
        let h = rel_step * theta[j].abs().max(1.0);
        probe[j] = theta[j] + h;
        let plus = problem.residuals(&probe)?;
        probe[j] = theta[j] - h;
        let minus = problem.residuals(&probe)?;
        probe[j] = theta[j];
        let h2 = (theta[j] + h) - (theta[j] - h);
        cols.push(
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / h2)
                .collect::<Vec<_>>(),
        );
    }
    let m = cols.first().map_or(0, Vec::len);
    let jac = DMatrix::from_fn(m, n, |i, j| cols[j][i]);
    jac.iter().all(|v| v.is_finite()).then_some(jac)
}

/// Condition number of `JᵀJ` after scaling it to unit diagonal.
pub fn scaled_condition(jtj: &DMatrix<f64>) -> f64 {
    let n = jtj.nrows();
    let d: Vec<f64> = (0..n).map(|i| jtj[(i, i)]).collect();
    if d.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    pub max_iter: usize,
    pub xtol: f64,
    pub ftol: f64,
    /// Scaled-gradient tolerance accepted when the damping blows up.
    pub gtol: f64,
    pub jacobian_step: f64,
    /// Above this scaled condition number the simplex runs first.
    pub max_condition: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            xtol: 1e-10,
            ftol: 1e-10,
            gtol: 1e-8,
            jacobian_step: 1e-6,
            max_condition: 1e14,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    LevenbergMarquardt,
    SimplexThenLm,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    pub message: String,
    /// `JᵀJ` at the returned point, when it could be evaluated.
    pub jtj: Option<DMatrix<f64>>,
    pub n_residuals: usize,
}

fn normal_equations(jac: &DMatrix<f64>, r: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let rv = DVector::from_column_slice(r);
    (jac.transpose() * jac, jac.transpose() * rv)
}

/// Largest cosine between the residual vector and any Jacobian column.
fn scaled_gradient(jtj: &DMatrix<f64>, g: &DVector<f64>, cost: f64) -> f64 {
    if cost == 0.0 {
        return 0.0;
    }
    (0..g.len())
        .map(|j| {
            let d = jtj[(j, j)];
            if d > 0.0 {
                g[j].abs() / (d * cost).sqrt()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Levenberg-Marquardt with Nielsen's damping update.
pub fn levenberg_marquardt<R: Residuals + ?Sized>(problem: &R, theta0: &[f64], s: &Settings) -> Outcome {
    let mut theta = theta0.to_vec();
    let n = theta.len();
    let Some(mut r) = problem.residuals(&theta).filter(|r| r.iter().all(|v| v.is_finite())) else {
        return Outcome {
            theta,
            cost: f64::INFINITY,
            initial_cost: f64::INFINITY,
            iterations: 0,
            converged: false,
            method: Method::LevenbergMarquardt,
            message: "model cannot be evaluated at the initial guess".into(),
            jtj: None,
            n_residuals: 0,
        };
    };
    let m = r.len();
    let mut f = sum_sq(&r);
    let initial_cost = f;
    let tiny_cost = 1e-28 * m as f64;
    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut message = String::from("iteration cap reached");
    let mut last_jtj = None;

    while iterations < s.max_iter {
        iterations += 1;
        let Some(jac) = numeric_jacobian(problem, &theta, s.jacobian_step) else {
            message = "Jacobian could not be evaluated".into();
            break;
        };
        let (jtj, g) = normal_equations(&jac, &r);
        let diag: Vec<f64> = (0..n).map(|j| jtj[(j, j)]).collect();
        let dmax = diag.iter().copied().fold(0.0, f64::max);
        last_jtj = Some(jtj.clone());
        if f <= tiny_cost {
            converged = true;
            message = "residual vanished".into();
            break;
        }
        if dmax == 0.0 {
            converged = true;
            message = "residuals do not depend on the parameters".into();
            break;
        }
        if mu < 0.0 {
            mu = 1e-3 * dmax;
        }
        let floor = 1e-12 * dmax;

        let mut accepted = false;
        while mu < 1e30 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += mu * diag[j].max(floor);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= nu;
                nu *= 2.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
            let f_new = residual_cost(problem, &trial);
            if f_new < f {
                let predicted: f64 = (0..n)
                    .map(|j| step[j] * (mu * diag[j].max(floor) * step[j] - g[j]))
                    .sum();
                let rho = if predicted > 0.0 { (f - f_new) / predicted } else { 0.0 };
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;

                let step_norm = step.norm();
                let theta_norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel_step = step_norm / (theta_norm + s.xtol);
                let rel_df = (f - f_new) / f;
                theta = trial;
                r = problem.residuals(&theta).unwrap_or_default();
                f = f_new;
                accepted = true;
                if rel_step < s.xtol && rel_df < s.ftol {
                    converged = true;
                    message = "relative step and residual change below tolerance".into();
                }
                break;
            }
            mu *= nu;
            nu *= 2.0;
        }
        if converged {
            if let Some(jac) = numeric_jacobian(problem, &theta, s.jacobian_step) {
                last_jtj = Some(normal_equations(&jac, &r).0);
            }
            break;
        }
        if !accepted {
            // no step can lower the cost: accept only at a stationary point
            converged = scaled_gradient(&jtj, &g, f) < s.gtol || f <= tiny_cost;
            message = if converged {
                "no further decrease possible at a stationary point".into()
            } else {
                "damping diverged away from a stationary point".into()
            };
            break;
        }
    }
    Outcome {
        theta,
        cost: f,
        initial_cost,
        iterations,
        converged,
        method: Method::LevenbergMarquardt,
        message,
        jtj: last_jtj,
        n_residuals: m,
    }
}

/// Nelder-Mead on the sum of squares. Returns `(theta, cost, iterations)`.
pub fn nelder_mead<R: Residuals + ?Sized>(problem: &R, theta0: &[f64], max_iter: usize, tol: f64) -> (Vec<f64>, f64, usize) {
    let n = theta0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((theta0.to_vec(), residual_cost(problem, theta0)));
    for j in 0..n {
        let mut v = theta0.to_vec();
        v[j] += 0.05 * v[j].abs().max(0.1);
        let c = residual_cost(problem, &v);
        simplex.push((v, c));
    }
    let mut it = 0;
    while it < max_iter {
        it += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= tol * (best.abs() + tol) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = residual_cost(problem, &xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = residual_cost(problem, &xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let x = along(-0.5);
                let f = residual_cost(problem, &x);
                (x, f)
            } else {
                let x = along(0.5);
                let f = residual_cost(problem, &x);
                (x, f)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let b = simplex[0].0.clone();
                for (v, f) in simplex.iter_mut().skip(1) {
                    for j in 0..n {
                        v[j] = b[j] + 0.5 * (v[j] - b[j]);
                    }
                    *f = residual_cost(problem, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (theta, c) = simplex.swap_remove(0);
    (theta, c, it)
}

/// LM from `theta0`, preceded by a simplex search when the starting
/// Jacobian is ill-conditioned or cannot be evaluated.
pub fn minimize<R: Residuals + ?Sized>(problem: &R, theta0: &[f64], s: &Settings) -> Outcome {
    let start_cost = residual_cost(problem, theta0);
    let ill = match problem.residuals(theta0) {
        Some(_) => match numeric_jacobian(problem, theta0, s.jacobian_step) {
            Some(jac) => scaled_condition(&(jac.transpose() * &jac)) > s.max_condition,
            None => true,
        },
        None => true,
    };
    if !ill {
        return levenberg_marquardt(problem, theta0, s);
    }
    let (theta_nm, _, nm_iters) = nelder_mead(problem, theta0, 200 * theta0.len().max(1), 1e-12);
    let mut out = levenberg_marquardt(problem, &theta_nm, s);
    out.iterations += nm_iters;
    out.method = Method::SimplexThenLm;
    out.initial_cost = start_cost;
    if out.cost.is_nan() || out.cost > start_cost {
        // never hand back something worse than the starting point
        out.theta = theta0.to_vec();
        out.cost = start_cost;
        out.converged = false;
        out.message = "simplex fallback failed to improve on the initial guess".into();
    }
    out
}
