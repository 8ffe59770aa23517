//! Uniform grids and one-dimensional minimization helpers.

/// Points `start, start + step, ...` up to and including `end` (within a
/// relative 1e-9 of a step). Each point is computed as `start + i * step`
/// so that no error accumulates; a final point that lands on `end` up to
/// rounding is snapped to `end`.
pub fn uniform(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) || step <= 0.0 || end < start {
        return Vec::new();
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    let mut out: Vec<f64> = (0..n).map(|i| start + i as f64 * step).collect();
    if let Some(last) = out.last_mut() {
        if (*last - end).abs() <= 1e-9 * step {
            *last = end;
        }
    }
    out
}

/// Points `i * step` for integer `i` inside `(lo, hi]`. Guarantees that 0 is
/// on the grid whenever it is in range.
pub fn anchored(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi <= lo {
        return Vec::new();
    }
    let first = (lo / step + 1e-9).floor() as i64 + 1;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimum of `f` on `[a, b]`, stopping once
/// the bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        // stop when the bracket no longer shrinks in floating point
        if c >= d {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap_or((x, fx))
}

/// Successive parabolic interpolation from `(x, fx)` with initial half-width
/// `h`. Only improvements are accepted, so the result is never worse than the
/// start. Converges quickly on smooth minima, including exact zeros of a
/// squared amplitude, where a bracketing search stalls at its tolerance.
pub fn parabolic_polish<F: Fn(f64) -> f64>(f: F, mut x: f64, mut fx: f64, mut h: f64) -> (f64, f64) {
    for _ in 0..60 {
        if h <= 1e-15 * x.abs().max(1.0) || fx == 0.0 {
            break;
        }
        let (fl, fr) = (f(x - h), f(x + h));
        let curvature = fl - 2.0 * fx + fr;
        if curvature.is_nan() || curvature <= 0.0 {
            h *= 0.25;
            continue;
        }
        let step = (0.5 * h * (fl - fr) / curvature).clamp(-h, h);
        let xn = x + step;
        let fxn = f(xn);
        if fxn < fx {
            x = xn;
            fx = fxn;
            h = step.abs().max(h * 1e-3);
        } else {
            h *= 0.25;
        }
    }
    (x, fx)
}

/// Indices of interior strict local minima of `values`. A flat bottom
/// spanning several samples is reported once, at its first sample.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] < values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] > values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}
