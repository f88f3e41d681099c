//! Continuum-side oracles: Monte Carlo and closed-form energies, and the
//! ellipse functional `F(a)` with its threshold `a*`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::manifolds::ellipse::solve_semi_minor;
use crate::manifolds::{sample_points, ManifoldModel, Shape};
use crate::points::Points;
use crate::quadrature::{bisect, integrate_split};
use crate::solver::energy_discrete;

/// Bootstrap replicates behind Monte Carlo standard errors.
pub const BOOTSTRAP_REPLICATES: usize = 200;
/// Absolute error target for `F(a)`.
pub const F_TOL: f64 = 1e-9;
/// Grid size of the `a*` scan.
pub const A_STAR_GRID: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnergyMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuumEnergy {
    pub value: f64,
    pub method: EnergyMethod,
    /// Absolute error bound (quadrature, closed form) or standard error (MC).
    pub error: f64,
}

/// Monte Carlo estimate of `E(f) = E|f(X) - f(X')|^2` for `X, X'` i.i.d.
/// uniform on the model, via the U-statistic over `m` draws. The standard
/// error comes from a bootstrap over the draws.
pub fn continuum_energy_mc<F>(model: &ManifoldModel, f: F, m: usize, seed: u64) -> Result<ContinuumEnergy>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if m < 100 {
        return Err(invalid(format!("Monte Carlo needs m >= 100 draws, got {m}")));
    }
    let x = sample_points(model, m, seed);
    let rows: Vec<Vec<f64>> = x.rows().map(&f).collect();
    let y = Points::from_rows(&rows);
    let value = energy_discrete(&y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB007_5748_A11C_E5ED);
    let dim = y.dim();
    let mut reps = Vec::with_capacity(BOOTSTRAP_REPLICATES);
    let mut buf = Vec::with_capacity(m * dim);
    for _ in 0..BOOTSTRAP_REPLICATES {
        buf.clear();
        for _ in 0..m {
            buf.extend_from_slice(y.row(rng.gen_range(0..m)));
        }
        reps.push(energy_discrete(&Points::new(dim, buf.clone())));
    }
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let var = reps.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;
    Ok(ContinuumEnergy {
        value,
        method: EnergyMethod::MonteCarlo,
        error: var.sqrt(),
    })
}

/// Energy of the identity on a convex model: twice the trace of the
/// covariance of the uniform law.
pub fn convex_supremum(model: &ManifoldModel) -> Result<ContinuumEnergy> {
    let value = match &model.shape {
        Shape::Interval { length } => length * length / 6.0,
        Shape::Rectangle { length, width } => (length * length + width * width) / 6.0,
        Shape::Disk { radius } => radius * radius,
        Shape::Tube { base, sigma, .. } => match **base {
            Shape::Interval { length } => stadium_energy(length, *sigma),
            _ => return Err(invalid(format!("model `{}` is not convex", model.name))),
        },
        _ => return Err(invalid(format!("model `{}` is not convex", model.name))),
    };
    Ok(ContinuumEnergy {
        value,
        method: EnergyMethod::ClosedForm,
        error: 0.0,
    })
}

/// Rectangle `L x 2s` capped by two half-disks of radius `s`.
fn stadium_energy(length: f64, s: f64) -> f64 {
    let c = length / 2.0;
    let area = 2.0 * s * length + PI * s * s;
    let rect_x = 2.0 * s * length.powi(3) / 12.0;
    let rect_y = length * (2.0 * s).powi(3) / 12.0;
    // Each cap: integral of (c + u)^2 over the half-disk u >= 0.
    let cap_x = c * c * PI * s * s / 2.0 + 2.0 * c * (2.0 * s.powi(3) / 3.0) + PI * s.powi(4) / 8.0;
    let caps_y = PI * s.powi(4) / 4.0;
    2.0 * (rect_x + rect_y + 2.0 * cap_x + caps_y) / area
}

/// Semi-minor axis of `K_a`; `a` must lie in `[1, pi/2)`.
pub fn solve_b(a: f64) -> Result<f64> {
    solve_semi_minor(a)
}

fn b_or_degenerate(a: f64) -> Result<f64> {
    if (a - PI / 2.0).abs() <= 1e-15 {
        Ok(0.0)
    } else {
        solve_b(a)
    }
}

/// `F(a) = int_0^{2pi} (a^2 cos^2 t + b^2 sin^2 t) sqrt(a^2 sin^2 t + b^2 cos^2 t) dt`
/// for `a` in `[1, pi/2]`, with `b = 0` at the right endpoint.
pub fn ellipse_f(a: f64) -> Result<ContinuumEnergy> {
    if !(1.0..=PI / 2.0).contains(&a) {
        return Err(invalid(format!("a={a} must lie in [1, pi/2]")));
    }
    let b = b_or_degenerate(a)?;
    Ok(ellipse_f_with_b(a, b))
}

/// The same integral for explicit semi-axes.
pub fn ellipse_f_with_b(a: f64, b: f64) -> ContinuumEnergy {
    let integrand = |t: f64| {
        let (s, c) = t.sin_cos();
        (a * a * c * c + b * b * s * s) * (a * a * s * s + b * b * c * c).sqrt()
    };
    // Kinks of the degenerate integrand sit at multiples of pi.
    let breaks = [0.0, PI / 2.0, PI, 1.5 * PI, 2.0 * PI];
    let q = integrate_split(integrand, &breaks, F_TOL / 10.0);
    ContinuumEnergy {
        value: q.value,
        method: EnergyMethod::Quadrature,
        error: q.error,
    }
}

/// `E_0 = F(a) / pi`: energy of the arc-length-uniform law on `K_a` under the
/// inclusion map.
pub fn circle_energy_identity(a: f64) -> Result<f64> {
    Ok(ellipse_f(a)?.value / PI)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AStar {
    /// Infimum of `a` in `(1, pi/2)` with `F(a) < 2 pi - 1e-9`, if any.
    pub a_star: Option<f64>,
    /// Whether `F` strictly decreased along the whole scan grid.
    pub monotone_decreasing: bool,
    /// Scan grid `(a, F(a))`.
    pub grid: Vec<(f64, f64)>,
}

/// Scans `F` on a uniform grid over `(1, pi/2)` and bisects the first drop
/// of `F - 2 pi` below `-1e-9` to tolerance `1e-6`.
pub fn find_a_star() -> Result<AStar> {
    let f1 = 2.0 * PI;
    let margin = 1e-9;
    let lo = 1.0;
    let hi = PI / 2.0;
    let mut grid = Vec::with_capacity(A_STAR_GRID);
    for k in 1..=A_STAR_GRID {
        let a = lo + (hi - lo) * k as f64 / (A_STAR_GRID + 1) as f64;
        grid.push((a, ellipse_f(a)?.value));
    }
    let monotone_decreasing = grid.windows(2).all(|w| w[1].1 < w[0].1) && grid[0].1 < f1;
    let first = grid.iter().position(|&(_, f)| f < f1 - margin);
    let a_star = match first {
        None => None,
        Some(k) => {
            let left = if k == 0 { lo } else { grid[k - 1].0 };
            // Positive while F is still above the threshold.
            let h = |a: f64| {
                if a <= 1.0 {
                    margin
                } else {
                    ellipse_f(a).map(|e| e.value).unwrap_or(f64::NAN) - (f1 - margin)
                }
            };
            Some(bisect(h, left, grid[k].0, 1e-6).unwrap_or(grid[k].0))
        }
    };
    Ok(AStar {
        a_star,
        monotone_decreasing,
        grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub a: f64,
    pub b: f64,
    pub f: f64,
    pub e0: f64,
}

/// `F` and `E_0` over a grid of `a` values in `[1, pi/2]`.
pub fn oracle_table(grid: &[f64]) -> Result<Vec<OracleRow>> {
    grid.iter()
        .map(|&a| {
            let b = if (1.0..=PI / 2.0).contains(&a) {
                b_or_degenerate(a)?
            } else {
                return Err(invalid(format!("a={a} must lie in [1, pi/2]")));
            };
            let f = ellipse_f_with_b(a, b).value;
            Ok(OracleRow { a, b, f, e0: f / PI })
        })
        .collect()
}

/// CSV with header `a,b,F,E0`.
pub fn oracle_table_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from("a,b,F,E0\n");
    for r in rows {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r.a, r.b, r.f, r.e0);
    }
    out
}

/// Inclusive grid `start, start + step, ...` not exceeding `stop`.
pub fn a_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(invalid("grid needs step > 0 and stop >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_at_one_is_two_pi() {
        let f = ellipse_f(1.0).unwrap();
        assert!((f.value - 2.0 * PI).abs() < 1e-9);
        assert!((circle_energy_identity(1.0).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_endpoint_matches_pi_cubed_over_six() {
        let f = ellipse_f(PI / 2.0).unwrap();
        assert!((f.value - PI.powi(3) / 6.0).abs() < 1e-9, "{}", f.value);
    }

    #[test]
    fn stadium_with_zero_radius_is_interval() {
        assert!((stadium_energy(2.0, 1e-12) - 4.0 / 6.0).abs() < 1e-9);
        // Zero length: a disk of radius s.
        assert!((stadium_energy(0.0, 0.5) - 0.25).abs() < 1e-14);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn grid_is_inclusive() {
        let g = a_grid(1.0, 1.5707, 0.01).unwrap();
        assert_eq!(g.len(), 58);
        assert!((g[57] - 1.57).abs() < 1e-12);
    }
}
