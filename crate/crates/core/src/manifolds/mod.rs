//! Benchmark domains: thin sets (curves), thick sets (planar regions and
//! tubular neighborhoods), uniform samplers, exact intrinsic-distance oracles
//! and reference isometries.

pub mod ellipse;
pub mod hole;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ellipse::{perimeter as ellipse_perimeter, solve_semi_minor, speed as ellipse_speed, EllipseSpec};
pub use hole::{annulus_geodesic, ConvexHole};

use crate::error::{invalid, MvuError, Result};
use crate::points::{dist, norm, Points};

/// Absolute slack of the membership predicate.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Vertices used to polygonize the hole of an elliptical tube.
const HOLE_VERTICES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetKind {
    Thin,
    Thick,
}

/// Geometry of a model. Curves are parametrized by arc length from a fixed
/// starting point; every shape lives in the plane.
#[derive(Debug, Clone)]
pub enum Shape {
    /// `[0, length] x {0}`.
    Interval { length: f64 },
    /// `[0, length] x [0, width]`.
    Rectangle { length: f64, width: f64 },
    /// Disk of `radius` centered at the origin.
    Disk { radius: f64 },
    /// Circle of `radius` centered at the origin.
    Circle { radius: f64 },
    /// Arc `{radius (cos θ, sin θ) : 0 <= θ <= length / radius}`.
    Arc { radius: f64, length: f64 },
    /// Perimeter-2π ellipse `K_a`.
    Ellipse(Arc<EllipseSpec>),
    /// Closed `sigma`-neighborhood of a curve or segment.
    Tube {
        base: Box<Shape>,
        sigma: f64,
        hole: Option<Arc<ConvexHole>>,
    },
}

#[derive(Debug, Clone)]
pub struct ManifoldModel {
    pub name: String,
    pub shape: Shape,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub kind: SetKind,
    /// Regularity radius: the reach for thin sets, the reach of the boundary
    /// for thick sets, and +inf for convex sets.
    pub reach: f64,
    /// Intrinsic diameter.
    pub diameter: f64,
    pub has_isometry: bool,
    /// d-dimensional volume (length or area).
    pub volume: f64,
}

/// Model parameters as string key/value pairs, as they appear in configs.
pub type ModelParams = BTreeMap<String, String>;

fn param(params: &ModelParams, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => v
            .trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("parameter `{key}`: cannot parse `{v}` as a number"))),
        None => default.ok_or_else(|| invalid(format!("missing parameter `{key}`"))),
    }
}

/// Builds a catalog model from its identifier and parameters.
///
/// Tubes take `base` plus the base model's parameters and `sigma`.
pub fn make_model(name: &str, params: &ModelParams) -> Result<ManifoldModel> {
    match name {
        "interval" => ManifoldModel::interval(param(params, "length", Some(1.0))?),
        "rectangle" => ManifoldModel::rectangle(
            param(params, "length", Some(1.0))?,
            param(params, "width", Some(1.0))?,
        ),
        "disk" => ManifoldModel::disk(param(params, "radius", Some(1.0))?),
        "circle" => ManifoldModel::circle(param(params, "radius", Some(1.0))?),
        "arc" => ManifoldModel::arc(
            param(params, "radius", Some(1.0))?,
            param(params, "length", Some(2.0))?,
        ),
        "ellipse" => ManifoldModel::ellipse(param(params, "a", None)?),
        "tube" => {
            let base_name = params
                .get("base")
                .ok_or_else(|| invalid("tube requires `base`"))?;
            if base_name == "tube" {
                return Err(invalid("tube of a tube is not supported"));
            }
            let base = make_model(base_name, params)?;
            ManifoldModel::tube(&base, param(params, "sigma", None)?)
        }
        other => Err(invalid(format!("unknown model `{other}`"))),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ManifoldModel {
    pub fn interval(length: f64) -> Result<Self> {
        let length = positive("length", length)?;
        Ok(Self {
            name: format!("interval(length={length})"),
            shape: Shape::Interval { length },
            intrinsic_dim: 1,
            ambient_dim: 2,
            kind: SetKind::Thin,
            reach: f64::INFINITY,
            diameter: length,
            has_isometry: true,
            volume: length,
        })
    }

    pub fn rectangle(length: f64, width: f64) -> Result<Self> {
        let length = positive("length", length)?;
        let width = positive("width", width)?;
        Ok(Self {
            name: format!("rectangle(length={length},width={width})"),
            shape: Shape::Rectangle { length, width },
            intrinsic_dim: 2,
            ambient_dim: 2,
            kind: SetKind::Thick,
            reach: f64::INFINITY,
            diameter: length.hypot(width),
            has_isometry: true,
            volume: length * width,
        })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        let radius = positive("radius", radius)?;
        Ok(Self {
            name: format!("disk(radius={radius})"),
            shape: Shape::Disk { radius },
            intrinsic_dim: 2,
            ambient_dim: 2,
            kind: SetKind::Thick,
            reach: f64::INFINITY,
            diameter: 2.0 * radius,
            has_isometry: true,
            volume: PI * radius * radius,
        })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        let radius = positive("radius", radius)?;
        Ok(Self {
            name: format!("circle(radius={radius})"),
            shape: Shape::Circle { radius },
            intrinsic_dim: 1,
            ambient_dim: 2,
            kind: SetKind::Thin,
            reach: radius,
            diameter: PI * radius,
            has_isometry: false,
            volume: 2.0 * PI * radius,
        })
    }

    /// Arc of the circle of `radius`, of arc length `length < 2π radius`.
    /// Its geodesically convex extension is taken to be the full circle.
    pub fn arc(radius: f64, length: f64) -> Result<Self> {
        let radius = positive("radius", radius)?;
        let length = positive("length", length)?;
        if length >= 2.0 * PI * radius {
            return Err(invalid("arc length must be below the circle perimeter"));
        }
        Ok(Self {
            name: format!("arc(radius={radius},length={length})"),
            shape: Shape::Arc { radius, length },
            intrinsic_dim: 1,
            ambient_dim: 2,
            kind: SetKind::Thin,
            reach: radius,
            diameter: length,
            has_isometry: true,
            volume: length,
        })
    }

    pub fn ellipse(a: f64) -> Result<Self> {
        let spec = EllipseSpec::new(a)?;
        Ok(Self {
            name: format!("ellipse(a={a})"),
            reach: spec.min_curvature_radius(),
            shape: Shape::Ellipse(Arc::new(spec)),
            intrinsic_dim: 1,
            ambient_dim: 2,
            kind: SetKind::Thin,
            diameter: PI,
            has_isometry: false,
            volume: 2.0 * PI,
        })
    }

    /// Closed `sigma`-neighborhood of an interval, circle, arc or ellipse.
    /// The reach recorded is that of the boundary, `min(sigma, reach(base) - sigma)`
    /// (`+inf` for the convex stadium around a segment).
    pub fn tube(base: &ManifoldModel, sigma: f64) -> Result<Self> {
        let sigma = positive("sigma", sigma)?;
        if sigma >= base.reach {
            return Err(invalid(format!(
                "sigma={sigma} must be below the reach {} of {}",
                base.reach, base.name
            )));
        }
        let name = format!("tube(base={},sigma={sigma})", base.name);
        let (reach, diameter, volume, has_isometry, hole) = match &base.shape {
            Shape::Interval { length } => (
                f64::INFINITY,
                length + 2.0 * sigma,
                2.0 * sigma * length + PI * sigma * sigma,
                true,
                None,
            ),
            Shape::Circle { radius } => {
                let (ri, ro) = (radius - sigma, radius + sigma);
                let diam = 2.0 * (ro * ro - ri * ri).sqrt() + ri * (PI - 2.0 * (ri / ro).acos());
                (
                    sigma.min(radius - sigma),
                    diam,
                    PI * (ro * ro - ri * ri),
                    false,
                    None,
                )
            }
            Shape::Arc { radius, length } => {
                if length / radius > PI + 1e-12 {
                    return Err(invalid("tubes are supported for arcs spanning at most pi radians"));
                }
                (
                    sigma.min(radius - sigma),
                    // Upper bound: cap tip to cap tip along the centerline.
                    length + 2.0 * sigma,
                    2.0 * sigma * length + PI * sigma * sigma,
                    false,
                    None,
                )
            }
            Shape::Ellipse(spec) => {
                let verts: Vec<[f64; 2]> = (0..HOLE_VERTICES)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / HOLE_VERTICES as f64;
                        let p = spec.point(t);
                        let n = spec.normal(t);
                        [p[0] - sigma * n[0], p[1] - sigma * n[1]]
                    })
                    .collect();
                let hole = Arc::new(ConvexHole::new(verts));
                let diam = ellipse_tube_diameter(spec, sigma, &hole);
                (
                    sigma.min(base.reach - sigma),
                    diam,
                    2.0 * sigma * spec.perimeter(),
                    false,
                    Some(hole),
                )
            }
            _ => {
                return Err(invalid(format!(
                    "tubes are supported around interval, circle, arc and ellipse, not {}",
                    base.name
                )))
            }
        };
        Ok(Self {
            name,
            shape: Shape::Tube {
                base: Box::new(base.shape.clone()),
                sigma,
                hole,
            },
            intrinsic_dim: 2,
            ambient_dim: 2,
            kind: SetKind::Thick,
            reach,
            diameter,
            has_isometry,
            volume,
        })
    }

    /// True when the model is a convex subset of the plane or a segment, in
    /// which case intrinsic and Euclidean distances coincide.
    pub fn is_convex(&self) -> bool {
        match &self.shape {
            Shape::Interval { .. } | Shape::Rectangle { .. } | Shape::Disk { .. } => true,
            Shape::Tube { base, .. } => matches!(**base, Shape::Interval { .. }),
            _ => false,
        }
    }

    /// Membership predicate with absolute tolerance [`MEMBERSHIP_TOL`].
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.ambient_dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let tol = MEMBERSHIP_TOL;
        match &self.shape {
            Shape::Interval { length } => x[1].abs() <= tol && x[0] >= -tol && x[0] <= length + tol,
            Shape::Rectangle { length, width } => {
                x[0] >= -tol && x[0] <= length + tol && x[1] >= -tol && x[1] <= width + tol
            }
            Shape::Disk { radius } => norm(x) <= radius + tol,
            Shape::Circle { radius } => (norm(x) - radius).abs() <= tol,
            Shape::Arc { radius, length } => {
                (norm(x) - radius).abs() <= tol && arc_angle(x, length / radius).is_some()
            }
            Shape::Ellipse(spec) => spec.distance_to_curve(x) <= tol,
            Shape::Tube { base, sigma, .. } => distance_to_shape(base, x) <= sigma + tol,
        }
    }

    fn ensure_member(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(MvuError::NotOnModel {
                model: self.name.clone(),
                point: x.to_vec(),
            })
        }
    }

    /// Whether [`intrinsic_distance`](Self::intrinsic_distance) is available.
    pub fn has_oracle(&self) -> bool {
        match &self.shape {
            Shape::Tube { base, .. } => !matches!(**base, Shape::Arc { .. }),
            _ => true,
        }
    }

    /// Exact intrinsic (geodesic) distance between two member points.
    ///
    /// Elliptical tubes use an 8192-gon inscribed in the hole boundary, which
    /// keeps the relative error well below 1e-3.
    pub fn intrinsic_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.ensure_member(x)?;
        self.ensure_member(y)?;
        self.intrinsic_distance_unchecked(x, y)
    }

    /// As [`intrinsic_distance`](Self::intrinsic_distance) without the
    /// membership check, for points already known to be on the model.
    pub fn intrinsic_distance_unchecked(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.shape {
            Shape::Interval { .. } | Shape::Rectangle { .. } | Shape::Disk { .. } => Ok(dist(x, y)),
            Shape::Circle { radius } => Ok(chord_to_arc(dist(x, y), *radius)),
            Shape::Arc { radius, length } => {
                let span = length / radius;
                let tx = arc_angle(x, span).unwrap_or(0.0);
                let ty = arc_angle(y, span).unwrap_or(0.0);
                Ok(radius * (tx - ty).abs())
            }
            Shape::Ellipse(spec) => {
                let sx = spec.arc_length(spec.param_of(x));
                let sy = spec.arc_length(spec.param_of(y));
                let delta = (sx - sy).abs();
                Ok(delta.min(spec.perimeter() - delta))
            }
            Shape::Tube { base, sigma, hole } => match (&**base, hole) {
                (Shape::Interval { .. }, _) => Ok(dist(x, y)),
                (Shape::Circle { radius }, _) => Ok(annulus_geodesic(x, y, radius - sigma)),
                (Shape::Ellipse(_), Some(h)) => Ok(h.geodesic([x[0], x[1]], [y[0], y[1]])),
                _ => Err(MvuError::NoOracle(self.name.clone())),
            },
        }
    }

    /// Reference isometry `psi : M -> D ⊂ R^d`.
    pub fn reference_isometry(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.has_isometry {
            return Err(MvuError::NoIsometry(self.name.clone()));
        }
        self.ensure_member(x)?;
        Ok(match &self.shape {
            Shape::Interval { .. } => vec![x[0]],
            Shape::Arc { radius, length } => {
                vec![radius * arc_angle(x, length / radius).unwrap_or(0.0)]
            }
            _ => x.to_vec(),
        })
    }

    /// Applies [`reference_isometry`](Self::reference_isometry) to every row.
    pub fn reference_coordinates(&self, pts: &Points) -> Result<Points> {
        let mut data = Vec::with_capacity(pts.len() * self.intrinsic_dim);
        for r in pts.rows() {
            data.extend(self.reference_isometry(r)?);
        }
        Ok(Points::new(self.intrinsic_dim, data))
    }

    /// Density lower bound `alpha = 1 / vol_d(M)` of the uniform law.
    pub fn alpha(&self) -> f64 {
        1.0 / self.volume
    }

    /// One uniform draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        draw_shape(&self.shape, rng)
    }
}

fn chord_to_arc(chord: f64, radius: f64) -> f64 {
    2.0 * radius * (chord / (2.0 * radius)).min(1.0).asin()
}

/// Angle in `[0, span]` of a point on the arc, if it lies in the angular range.
fn arc_angle(x: &[f64], span: f64) -> Option<f64> {
    let mut t = x[1].atan2(x[0]);
    let eps = 1e-9;
    if t < -eps {
        t += 2.0 * PI;
    }
    let t = t.max(0.0);
    if t <= span + eps {
        Some(t.min(span))
    } else if t >= 2.0 * PI - eps {
        Some(0.0)
    } else {
        None
    }
}

fn distance_to_shape(shape: &Shape, x: &[f64]) -> f64 {
    match shape {
        Shape::Interval { length } => {
            let cx = x[0].clamp(0.0, *length);
            (x[0] - cx).hypot(x[1])
        }
        Shape::Circle { radius } => (norm(x) - radius).abs(),
        Shape::Arc { radius, length } => {
            let span = length / radius;
            match arc_angle(x, span) {
                Some(_) if norm(x) > 0.0 => (norm(x) - radius).abs(),
                _ => {
                    let e0 = [*radius, 0.0];
                    let e1 = [radius * span.cos(), radius * span.sin()];
                    dist(x, &e0).min(dist(x, &e1))
                }
            }
        }
        Shape::Ellipse(spec) => spec.distance_to_curve(x),
        _ => f64::NAN,
    }
}

fn draw_shape<R: Rng + ?Sized>(shape: &Shape, rng: &mut R) -> Vec<f64> {
    match shape {
        Shape::Interval { length } => vec![length * rng.gen::<f64>(), 0.0],
        Shape::Rectangle { length, width } => {
            vec![length * rng.gen::<f64>(), width * rng.gen::<f64>()]
        }
        Shape::Disk { radius } => {
            let r = radius * rng.gen::<f64>().sqrt();
            let t = 2.0 * PI * rng.gen::<f64>();
            vec![r * t.cos(), r * t.sin()]
        }
        Shape::Circle { radius } => {
            let t = 2.0 * PI * rng.gen::<f64>();
            vec![radius * t.cos(), radius * t.sin()]
        }
        Shape::Arc { radius, length } => {
            let t = (length / radius) * rng.gen::<f64>();
            vec![radius * t.cos(), radius * t.sin()]
        }
        Shape::Ellipse(spec) => {
            let t = spec.param_at(spec.perimeter() * rng.gen::<f64>());
            spec.point(t).to_vec()
        }
        Shape::Tube { base, sigma, .. } => draw_tube(base, *sigma, rng),
    }
}

/// Uniform point in the half-disk of radius `sigma` centered at `c`, on the
/// side of direction `out`.
fn half_disk<R: Rng + ?Sized>(c: [f64; 2], out: [f64; 2], sigma: f64, rng: &mut R) -> Vec<f64> {
    let r = sigma * rng.gen::<f64>().sqrt();
    let phi = PI * (rng.gen::<f64>() - 0.5);
    let side = [-out[1], out[0]];
    let (s, co) = phi.sin_cos();
    vec![
        c[0] + r * (co * out[0] + s * side[0]),
        c[1] + r * (co * out[1] + s * side[1]),
    ]
}

fn draw_tube<R: Rng + ?Sized>(base: &Shape, sigma: f64, rng: &mut R) -> Vec<f64> {
    match base {
        Shape::Interval { length } => {
            let body = 2.0 * sigma * length;
            let caps = PI * sigma * sigma;
            if rng.gen::<f64>() * (body + caps) < body {
                vec![length * rng.gen::<f64>(), sigma * (2.0 * rng.gen::<f64>() - 1.0)]
            } else if rng.gen::<bool>() {
                half_disk([0.0, 0.0], [-1.0, 0.0], sigma, rng)
            } else {
                half_disk([*length, 0.0], [1.0, 0.0], sigma, rng)
            }
        }
        Shape::Circle { radius } => {
            let (ri, ro) = (radius - sigma, radius + sigma);
            let r = (ri * ri + rng.gen::<f64>() * (ro * ro - ri * ri)).sqrt();
            let t = 2.0 * PI * rng.gen::<f64>();
            vec![r * t.cos(), r * t.sin()]
        }
        Shape::Arc { radius, length } => {
            let span = length / radius;
            let body = 2.0 * sigma * length;
            let caps = PI * sigma * sigma;
            if rng.gen::<f64>() * (body + caps) < body {
                let (ri, ro) = (radius - sigma, radius + sigma);
                let r = (ri * ri + rng.gen::<f64>() * (ro * ro - ri * ri)).sqrt();
                let t = span * rng.gen::<f64>();
                vec![r * t.cos(), r * t.sin()]
            } else if rng.gen::<bool>() {
                half_disk([*radius, 0.0], [0.0, -1.0], sigma, rng)
            } else {
                let (s, c) = span.sin_cos();
                half_disk([radius * c, radius * s], [-s, c], sigma, rng)
            }
        }
        Shape::Ellipse(spec) => {
            // Normal coordinates (s, u): area element (1 + u kappa(s)) ds du.
            let kmax = spec.a / (spec.b * spec.b);
            loop {
                let t = spec.param_at(spec.perimeter() * rng.gen::<f64>());
                let u = sigma * (2.0 * rng.gen::<f64>() - 1.0);
                let accept = (1.0 + u * spec.curvature(t)) / (1.0 + sigma * kmax);
                if rng.gen::<f64>() < accept {
                    let p = spec.point(t);
                    let n = spec.normal(t);
                    return vec![p[0] + u * n[0], p[1] + u * n[1]];
                }
            }
        }
        _ => unreachable!("tube bases are validated at construction"),
    }
}

fn ellipse_tube_diameter(spec: &EllipseSpec, sigma: f64, hole: &ConvexHole) -> f64 {
    // The farthest pair sits on the outer boundary, roughly antipodal.
    let m = 256;
    let outer: Vec<[f64; 2]> = (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            let p = spec.point(t);
            let n = spec.normal(t);
            [p[0] + sigma * n[0], p[1] + sigma * n[1]]
        })
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..m {
        for off in (m / 2 - 24)..=(m / 2 + 24) {
            let j = (i + off) % m;
            best = best.max(hole.geodesic(outer[i], outer[j]));
        }
    }
    best
}

/// `n` i.i.d. uniform draws from a model, reproducible from `(model, seed, n)`.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Points,
    pub model: Arc<ManifoldModel>,
    pub seed: u64,
}

impl PointCloud {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Wraps externally supplied points (no model membership is implied
    /// beyond what the caller guarantees).
    pub fn from_points(points: Points, model: Arc<ManifoldModel>, seed: u64) -> Self {
        Self {
            points,
            model,
            seed,
        }
    }
}

/// Draws `n >= 2` points uniformly (Hausdorff measure of the model's dimension).
pub fn sample(model: &Arc<ManifoldModel>, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 2 {
        return Err(invalid(format!("sample size n={n} must be at least 2")));
    }
    Ok(PointCloud {
        points: sample_points(model, n, seed),
        model: Arc::clone(model),
        seed,
    })
}

/// Uniform draws without the `n >= 2` restriction (probes, single points).
pub fn sample_points(model: &ManifoldModel, n: usize, seed: u64) -> Points {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * model.ambient_dim);
    for _ in 0..n {
        data.extend(model.draw(&mut rng));
    }
    Points::new(model.ambient_dim, data)
}

/// Lemma-style regularity check: returns the largest observed
/// `delta_M(x, x') / |x - x'| - 1` over the pairs, and whether every pair with
/// `|x - x'| < reach / 2` satisfied `ratio <= 4 |x - x'| / reach`.
pub fn regularity_constant_check(
    model: &ManifoldModel,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<(f64, bool)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (x, y) in pairs {
        let e = dist(x, y);
        if e == 0.0 {
            continue;
        }
        let g = model.intrinsic_distance(x, y)?;
        let ratio = g / e - 1.0;
        worst = worst.max(ratio);
        if model.reach.is_finite() && e < model.reach / 2.0 && ratio > 4.0 * e / model.reach + 1e-12 {
            ok = false;
        }
    }
    Ok((worst, ok))
}
