//! Shortest paths in a planar region `C \ H`, where `C` is convex and `H` is
//! a convex hole given as a CCW polygon. The taut path either is the straight
//! segment or leaves along a tangent, follows the hole boundary and leaves
//! along another tangent.

#[derive(Debug, Clone)]
pub struct ConvexHole {
    verts: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
    centroid: [f64; 2],
    /// Radii of discs about the centroid inside / containing the polygon.
    inradius: f64,
    circumradius: f64,
}

/// Stride of the coarse pass in the tangent search.
const COARSE: usize = 32;

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn d(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl ConvexHole {
    /// `verts` must be in counter-clockwise order and convex.
    pub fn new(verts: Vec<[f64; 2]>) -> Self {
        assert!(verts.len() >= 3);
        let mut cumulative = Vec::with_capacity(verts.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..verts.len() {
            acc += d(verts[i], verts[(i + 1) % verts.len()]);
            cumulative.push(acc);
        }
        let n = verts.len() as f64;
        let centroid = [
            verts.iter().map(|v| v[0]).sum::<f64>() / n,
            verts.iter().map(|v| v[1]).sum::<f64>() / n,
        ];
        let circumradius = verts.iter().map(|v| d(*v, centroid)).fold(0.0, f64::max);
        let k = verts.len();
        let inradius = (0..k)
            .map(|i| {
                let (a, b) = (verts[i], verts[(i + 1) % k]);
                cross(a, b, centroid) / d(a, b)
            })
            .fold(f64::INFINITY, f64::min);
        Self {
            verts,
            cumulative,
            centroid,
            inradius,
            circumradius,
        }
    }

    pub fn perimeter(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Whether the open segment `xy` meets the interior of the hole.
    pub fn blocks(&self, x: [f64; 2], y: [f64; 2]) -> bool {
        // Cheap decisions from the discs about the centroid.
        let sep = segment_point_distance(x, y, self.centroid);
        if sep >= self.circumradius {
            return false;
        }
        if sep < self.inradius * (1.0 - 1e-9) {
            return true;
        }
        let n = self.verts.len();
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        let dir = [y[0] - x[0], y[1] - x[1]];
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            // Interior is to the left of a->b: cross(a, b, p) > 0.
            let num = cross(a, b, x);
            let den = (b[0] - a[0]) * dir[1] - (b[1] - a[1]) * dir[0];
            if den.abs() < 1e-300 {
                if num <= 0.0 {
                    return false;
                }
                continue;
            }
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 >= t1 {
                return false;
            }
        }
        // Require a positive-length overlap so grazing contact is not a block.
        (t1 - t0) * (dir[0].hypot(dir[1])) > 1e-12
    }

    /// Indices of the two tangent vertices seen from an exterior point.
    ///
    /// The viewing angle is unimodal along the boundary on each side, so a
    /// coarse pass over every `COARSE`-th vertex followed by a local scan
    /// finds the extremes.
    fn tangents(&self, x: [f64; 2]) -> (usize, usize) {
        let dir = [self.centroid[0] - x[0], self.centroid[1] - x[1]];
        let angle = |i: usize| {
            let v = self.verts[i];
            let w = [v[0] - x[0], v[1] - x[1]];
            (dir[0] * w[1] - dir[1] * w[0]).atan2(dir[0] * w[0] + dir[1] * w[1])
        };
        let n = self.verts.len();
        let stride = if n >= 8 * COARSE { COARSE } else { 1 };
        let mut lo = (f64::INFINITY, 0);
        let mut hi = (f64::NEG_INFINITY, 0);
        for i in (0..n).step_by(stride) {
            let ang = angle(i);
            if ang < lo.0 {
                lo = (ang, i);
            }
            if ang > hi.0 {
                hi = (ang, i);
            }
        }
        if stride > 1 {
            let refine = |centre: usize, better: &dyn Fn(f64, f64) -> bool, start: (f64, usize)| {
                let mut best = start;
                for off in 0..=2 * stride {
                    let i = (centre + n + off - stride) % n;
                    let ang = angle(i);
                    if better(ang, best.0) {
                        best = (ang, i);
                    }
                }
                best
            };
            lo = refine(lo.1, &|a, b| a < b, lo);
            hi = refine(hi.1, &|a, b| a > b, hi);
        }
        (lo.1, hi.1)
    }

    fn ccw_arc(&self, i: usize, j: usize) -> f64 {
        (self.cumulative[j] - self.cumulative[i]).rem_euclid(self.perimeter())
    }

    pub fn geodesic(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        if !self.blocks(x, y) {
            return d(x, y);
        }
        let (a0, a1) = self.tangents(x);
        let (b0, b1) = self.tangents(y);
        let mut best = f64::INFINITY;
        for &i in &[a0, a1] {
            for &j in &[b0, b1] {
                let legs = d(x, self.verts[i]) + d(self.verts[j], y);
                let ccw = self.ccw_arc(i, j);
                let cw = self.perimeter() - ccw;
                best = best.min(legs + ccw.min(cw));
            }
        }
        best
    }
}

fn segment_point_distance(x: [f64; 2], y: [f64; 2], p: [f64; 2]) -> f64 {
    let dx = y[0] - x[0];
    let dy = y[1] - x[1];
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - x[0]) * dx + (p[1] - x[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    d([x[0] + t * dx, x[1] + t * dy], p)
}

/// Closed-form geodesic in the annulus `rho_in <= |z| <= rho_out` centered at
/// the origin.
pub fn annulus_geodesic(x: &[f64], y: &[f64], rho_in: f64) -> f64 {
    let dx = y[0] - x[0];
    let dy = y[1] - x[1];
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return 0.0;
    }
    let t = (-(x[0] * dx + x[1] * dy) / len2).clamp(0.0, 1.0);
    let px = x[0] + t * dx;
    let py = x[1] + t * dy;
    if px.hypot(py) >= rho_in {
        return len2.sqrt();
    }
    let rx = x[0].hypot(x[1]);
    let ry = y[0].hypot(y[1]);
    let cosang = ((x[0] * y[0] + x[1] * y[1]) / (rx * ry)).clamp(-1.0, 1.0);
    let theta = cosang.acos();
    let ax = (rho_in / rx).clamp(-1.0, 1.0).acos();
    let ay = (rho_in / ry).clamp(-1.0, 1.0).acos();
    (rx * rx - rho_in * rho_in).max(0.0).sqrt()
        + (ry * ry - rho_in * rho_in).max(0.0).sqrt()
        + rho_in * (theta - ax - ay).max(0.0)
}
