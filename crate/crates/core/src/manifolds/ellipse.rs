//! Axis-aligned ellipses of perimeter 2π, parametrized as `(a cos t, b sin t)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{adaptive_simpson, bisect};

const TABLE_PANELS: usize = 2048;
const PANEL_TOL: f64 = 1e-14;

/// Ellipse `K_a`: semi-major axis `a`, semi-minor axis `b(a)` chosen so that
/// the perimeter is exactly 2π.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EllipseSpec {
    pub a: f64,
    pub b: f64,
    /// Cumulative arc length at `t_k = 2πk / TABLE_PANELS`.
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl PartialEq for EllipseSpec {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

/// Speed `|d/dt (a cos t, b sin t)|`.
#[inline]
pub fn speed(a: f64, b: f64, t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    (a * a * s * s + b * b * c * c).sqrt()
}

/// Perimeter of the ellipse with semi-axes `a`, `b`. The integrand is smooth
/// for `b > 0`; for `b = 0` it has kinks at multiples of π, so the range is
/// split there.
pub fn perimeter(a: f64, b: f64, tol: f64) -> f64 {
    let f = |t: f64| speed(a, b, t);
    let q1 = adaptive_simpson(f, 0.0, PI / 2.0, tol / 4.0);
    // Four-fold symmetry.
    4.0 * q1.value
}

/// Semi-minor axis `b` such that the perimeter equals 2π.
pub fn solve_semi_minor(a: f64) -> Result<f64> {
    if !(1.0..PI / 2.0).contains(&a) {
        return Err(invalid(format!("semi-major axis a={a} must lie in [1, pi/2)")));
    }
    if a == 1.0 {
        return Ok(1.0);
    }
    let g = |b: f64| perimeter(a, b, 1e-14) - 2.0 * PI;
    bisect(g, 0.0, 1.0, 1e-15)
        .ok_or_else(|| invalid(format!("no perimeter root for a={a}")))
}

impl EllipseSpec {
    pub fn new(a: f64) -> Result<Self> {
        let b = solve_semi_minor(a)?;
        let h = 2.0 * PI / TABLE_PANELS as f64;
        let mut cumulative = Vec::with_capacity(TABLE_PANELS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..TABLE_PANELS {
            let t0 = k as f64 * h;
            acc += adaptive_simpson(|t| speed(a, b, t), t0, t0 + h, PANEL_TOL).value;
            cumulative.push(acc);
        }
        Ok(Self { a, b, cumulative })
    }

    pub fn perimeter(&self) -> f64 {
        self.cumulative[TABLE_PANELS]
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        [self.a * t.cos(), self.b * t.sin()]
    }

    /// Outward unit normal at parameter `t`.
    pub fn normal(&self, t: f64) -> [f64; 2] {
        let (s, c) = t.sin_cos();
        let nx = self.b * c;
        let ny = self.a * s;
        let len = nx.hypot(ny);
        [nx / len, ny / len]
    }

    pub fn curvature(&self, t: f64) -> f64 {
        let sp = speed(self.a, self.b, t);
        self.a * self.b / (sp * sp * sp)
    }

    /// Minimum radius of curvature `b^2 / a`; equals the reach of the curve.
    pub fn min_curvature_radius(&self) -> f64 {
        self.b * self.b / self.a
    }

    /// Arc length from parameter 0 to `t` (t in [0, 2π]).
    pub fn arc_length(&self, t: f64) -> f64 {
        let t = t.rem_euclid(2.0 * PI);
        let h = 2.0 * PI / TABLE_PANELS as f64;
        let k = ((t / h).floor() as usize).min(TABLE_PANELS - 1);
        let t0 = k as f64 * h;
        let rest = if t > t0 {
            adaptive_simpson(|u| speed(self.a, self.b, u), t0, t, PANEL_TOL).value
        } else {
            0.0
        };
        self.cumulative[k] + rest
    }

    /// Parameter `t` at arc length `s` from `t = 0`.
    pub fn param_at(&self, s: f64) -> f64 {
        let p = self.perimeter();
        let s = s.rem_euclid(p);
        let k = match self
            .cumulative
            .binary_search_by(|c| c.total_cmp(&s))
        {
            Ok(k) => return (k as f64) * 2.0 * PI / TABLE_PANELS as f64,
            Err(k) => k.saturating_sub(1).min(TABLE_PANELS - 1),
        };
        let h = 2.0 * PI / TABLE_PANELS as f64;
        let lo = k as f64 * h;
        let target = s - self.cumulative[k];
        // Newton from the linear guess; arc length is strictly increasing.
        let mut t = lo + h * target / (self.cumulative[k + 1] - self.cumulative[k]);
        for _ in 0..30 {
            let g = adaptive_simpson(|u| speed(self.a, self.b, u), lo, t, PANEL_TOL).value - target;
            let step = g / speed(self.a, self.b, t);
            t -= step;
            t = t.clamp(lo, lo + h);
            if step.abs() < 1e-15 {
                break;
            }
        }
        t
    }

    /// Parameter of a point on (or near) the ellipse.
    pub fn param_of(&self, x: &[f64]) -> f64 {
        (x[1] / self.b).atan2(x[0] / self.a).rem_euclid(2.0 * PI)
    }

    /// Closest-point parameter for an arbitrary planar point.
    pub fn closest_param(&self, x: &[f64]) -> f64 {
        let g = |t: f64| {
            let p = self.point(t);
            (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
        };
        let m = 720;
        let mut best = 0.0;
        let mut best_v = f64::INFINITY;
        for k in 0..m {
            let t = 2.0 * PI * k as f64 / m as f64;
            let v = g(t);
            if v < best_v {
                best_v = v;
                best = t;
            }
        }
        // Newton on d/dt of squared distance.
        let mut t = best;
        for _ in 0..50 {
            let (s, c) = t.sin_cos();
            let px = self.a * c - x[0];
            let py = self.b * s - x[1];
            let d1 = -self.a * s * px + self.b * c * py;
            let d2 = self.a * self.a * s * s + self.b * self.b * c * c
                - self.a * c * px
                - self.b * s * py;
            if d2 <= 0.0 {
                break;
            }
            let step = d1 / d2;
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        if g(t) <= best_v {
            t
        } else {
            best
        }
    }

    pub fn distance_to_curve(&self, x: &[f64]) -> f64 {
        let p = self.point(self.closest_param(x));
        (p[0] - x[0]).hypot(p[1] - x[1])
    }
}
