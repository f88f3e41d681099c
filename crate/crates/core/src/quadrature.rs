//! Adaptive Simpson quadrature and bracketing root finding.

/// Integral value together with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson rule on `[a, b]` with the Richardson correction
/// `(S2 - S1) / 15` applied on accepted panels.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3;
    let (value, error) = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut evals);
    Quadrature {
        value,
        error,
        evaluations: evals,
    }
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return (left + right + delta / 15.0, (delta / 15.0).abs());
    }
    let (lv, le) = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals);
    let (rv, re) = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals);
    (lv + rv, le + re)
}

/// Integrates over consecutive panels `breaks[k]..breaks[k+1]`, splitting the
/// tolerance evenly. Use this to put kinks of the integrand on panel edges.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Quadrature {
    assert!(breaks.len() >= 2);
    let panels = (breaks.len() - 1) as f64;
    let mut out = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in breaks.windows(2) {
        let q = adaptive_simpson(&f, w[0], w[1], tol / panels);
        out.value += q.value;
        out.error += q.error;
        out.evaluations += q.evaluations;
    }
    out
}

/// Bisection on a sign-changing bracket. Returns the midpoint of the final
/// bracket once its width drops below `xtol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return None;
    }
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((q.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn sine_over_period_half() {
        let q = adaptive_simpson(f64::sin, 0.0, PI, 1e-12);
        assert!((q.value - 2.0).abs() < 1e-11, "{}", q.value);
        assert!(q.error < 1e-11);
    }

    #[test]
    fn kinked_integrand_needs_split() {
        // |sin t| cos^2 t over a full period: 4/3.
        let f = |t: f64| t.sin().abs() * t.cos().powi(2);
        let q = integrate_split(f, &[0.0, PI, 2.0 * PI], 1e-12);
        assert!((q.value - 4.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-6).is_none());
    }
}
