//! Discrete MVU: maximize the energy of `Y` subject to
//! `|y_i - y_j| <= |x_i - x_j|` on every edge of the neighborhood graph.
//!
//! Both backends run the edge-splitting augmented Lagrangian in [`admm`],
//! with one banded Cholesky factor of the graph Laplacian shared by every
//! sweep. The coordinate backend works on `Y` directly in the ambient
//! dimension; the Gram backend optimizes a rank-`k` factor `V` with
//! `K = V V^T` and rows summing to zero.

mod admm;
mod banded;


use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use admm::{EdgeSplitting, Objective, SplitState, SweepStats};
pub use banded::{rcm_order, GroundedLaplacian};

/// Neighbor-averaging passes applied to Gaussian starts.
const SMOOTHING_PASSES: usize = 20;
/// Outer iterations without the primal residual halving before the
/// penalty grows.
const PENALTY_PATIENCE: usize = 8;
/// Inverse-iteration steps for the algebraic connectivity estimate.
const CONNECTIVITY_ITERATIONS: usize = 60;

use crate::eigen::jacobi_eigen;
use crate::error::{invalid, MvuError, Result};
use crate::graph::NeighborGraph;
use crate::manifolds::PointCloud;
use crate::points::{dist, tree_sum, Points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    CoordinateAscent,
    GramLowRank,
}

impl std::str::FromStr for Backend {
    type Err = MvuError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinate" | "CoordinateAscent" => Ok(Backend::CoordinateAscent),
            "gram" | "GramLowRank" => Ok(Backend::GramLowRank),
            _ => Err(invalid(format!("unknown backend `{s}` (expected coordinate|gram)"))),
        }
    }
}

/// Where the first start of a solve begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    /// `y_i = x_i`: feasible with zero violation.
    Identity,
    /// Gaussian coordinates shrunk until feasible.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: Backend,
    /// Allowed edge violation `(|y_i - y_j| - l_e)_+`, in units of `r`.
    pub feas_tol: f64,
    /// Over-relaxation of the edge-copy update, in `[1, 2)`.
    pub relaxation: f64,
    /// Initial penalty in units of the stability bound `w / lambda_2`, with
    /// `w = 1/n` the objective weight and `lambda_2` the algebraic
    /// connectivity of the graph.
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Factor rank for the Gram backend; `None` means `min(p, 10)`.
    pub rank_cap: Option<usize>,
    pub seed: u64,
    /// Relative energy change between outer iterations that counts as settled.
    pub stop_tol: f64,
    /// Extra random starts; the best final energy wins.
    pub restarts: usize,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: Backend::CoordinateAscent,
            feas_tol: 1e-6,
            relaxation: 1.6,
            initial_penalty: 2.0,
            penalty_growth: 4.0,
            max_outer: 400,
            max_inner: 25,
            rank_cap: None,
            seed: 0,
            stop_tol: 1e-9,
            restarts: 3,
            init: Init::Identity,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feas_tol", self.feas_tol),
            ("initial_penalty", self.initial_penalty),
            ("stop_tol", self.stop_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(1.0..2.0).contains(&self.relaxation) {
            return Err(invalid("relaxation must lie in [1, 2)"));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(invalid("penalty_growth must exceed 1"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid("iteration budgets must be positive"));
        }
        if self.rank_cap == Some(0) {
            return Err(invalid("rank_cap must be at least 1"));
        }
        Ok(())
    }
}

/// A candidate solution: centered rows plus energy and violation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub y: Points,
    pub energy: f64,
    /// `max_e (|y_i - y_j| - |x_i - x_j|)_+`.
    pub max_violation: f64,
    pub centered: bool,
}

impl Embedding {
    /// Builds the metadata for `y` against the edges of `g`.
    pub fn from_points(y: Points, g: &NeighborGraph) -> Self {
        let energy = energy_discrete(&y);
        let max_violation = g
            .edges
            .iter()
            .map(|e| (dist(y.row(e.i), y.row(e.j)) - e.length).max(0.0))
            .fold(0.0, f64::max);
        let scale = y.rows().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max);
        let centered = y.mean().iter().all(|m| m.abs() <= 1e-12 * scale.max(1e-300));
        Self {
            y,
            energy,
            max_violation,
            centered,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn to_csv(&self) -> String {
        self.y.to_csv()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub energy: f64,
    pub max_violation: f64,
    pub penalty: f64,
    pub steps: usize,
    /// Best energy so far among iterates within the feasibility tolerance.
    pub best_feasible: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    pub wall_time: f64,
    pub converged: bool,
    /// Final energy of every start (identity first when used).
    pub start_energies: Vec<f64>,
    pub best_start: usize,
}

impl SolveTrace {
    /// CSV with header `iter,energy,max_violation,penalty,steps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,energy,max_violation,penalty,steps\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{}\n",
                r.iter, r.energy, r.max_violation, r.penalty, r.steps
            ));
        }
        out
    }
}

/// `E(Y) = 1/(n(n-1)) sum_{i,j} |y_i - y_j|^2`, evaluated in `O(np)` through
/// `E(Y) = 2/(n-1) sum_i |y_i - mean|^2`.
pub fn energy_discrete(y: &Points) -> f64 {
    let n = y.len();
    assert!(n >= 2, "energy needs at least two points");
    let mean = y.mean();
    let terms: Vec<f64> = y
        .rows()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum())
        .collect();
    2.0 * tree_sum(&terms) / (n - 1) as f64
}

/// The `O(n^2 p)` double sum, for cross-checking [`energy_discrete`].
pub fn energy_double_sum(y: &Points) -> f64 {
    let n = y.len();
    assert!(n >= 2, "energy needs at least two points");
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            terms.push(crate::points::dist2(y.row(i), y.row(j)));
        }
    }
    tree_sum(&terms) / (n * (n - 1)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub edges: usize,
    pub max_violation: f64,
    pub mean_violation: f64,
    /// Largest violation relative to the edge length.
    pub max_relative_violation: f64,
    /// Edges with `|l_e - |y_i - y_j|| < 1e-6 r`.
    pub tight: usize,
    pub tight_fraction: f64,
}

/// Per-edge slack statistics of `y` against the graph built on `cloud`.
pub fn feasibility_report(cloud: &PointCloud, g: &NeighborGraph, y: &Points) -> FeasibilityReport {
    debug_assert_eq!(cloud.n(), y.len());
    let thresh = 1e-6 * g.r;
    let mut viol = Vec::with_capacity(g.edges.len());
    let mut max_rel: f64 = 0.0;
    let mut tight = 0;
    for e in &g.edges {
        let len = dist(y.row(e.i), y.row(e.j));
        let v = (len - e.length).max(0.0);
        viol.push(v);
        if e.length > 0.0 {
            max_rel = max_rel.max(v / e.length);
        }
        if (e.length - len).abs() < thresh {
            tight += 1;
        }
    }
    let m = g.edges.len();
    FeasibilityReport {
        edges: m,
        max_violation: viol.iter().copied().fold(0.0, f64::max),
        mean_violation: if m == 0 { 0.0 } else { tree_sum(&viol) / m as f64 },
        max_relative_violation: max_rel,
        tight,
        tight_fraction: if m == 0 { 1.0 } else { tight as f64 / m as f64 },
    }
}

/// Top-`d` principal coordinates of a centered embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinates {
    pub coords: Points,
    /// Full nonzero spectrum of the centered Gram matrix, descending.
    pub spectrum: Vec<f64>,
    /// Share of the Gram trace captured by the first `d` eigenvalues.
    pub trace_fraction: f64,
}

/// Spectral truncation of the centered Gram matrix `K = Y Y^T`.
///
/// The nonzero eigenpairs of `K` are recovered from the `p x p` matrix
/// `Y^T Y` (same nonzero spectrum; `u_a sqrt(s_a) = Y v_a`), which is exact
/// and avoids forming `K`.
pub fn extract_coordinates(emb: &Embedding, d: usize) -> Result<Coordinates> {
    extract_from_points(&emb.y, d)
}

pub fn extract_from_points(y: &Points, d: usize) -> Result<Coordinates> {
    if d == 0 {
        return Err(invalid("target dimension must be positive"));
    }
    let y = y.centered();
    let p = y.dim();
    let mut c = vec![0.0; p * p];
    for a in 0..p {
        for b in a..p {
            let col: Vec<f64> = y.rows().map(|r| r[a] * r[b]).collect();
            let v = tree_sum(&col);
            c[a * p + b] = v;
            c[b * p + a] = v;
        }
    }
    let eig = jacobi_eigen(&c, p);
    let spectrum: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let top = spectrum.first().copied().unwrap_or(0.0);
    let rank = spectrum.iter().filter(|&&v| v > 1e-12 * top && v > 0.0).count();
    if d > rank {
        return Err(MvuError::RankDeficient { requested: d, rank });
    }
    let q: Vec<f64> = eig.vectors[..d].concat();
    let coords = y.map_linear(&q, d);
    let total: f64 = spectrum.iter().sum();
    let captured: f64 = spectrum[..d].iter().sum();
    Ok(Coordinates {
        coords,
        spectrum: spectrum[..rank].to_vec(),
        trace_fraction: if total > 0.0 { captured / total } else { 1.0 },
    })
}

/// Centers, rotates onto principal axes and fixes each axis sign by the first
/// odd moment that is clearly nonzero. Keeps the column count of `y`.
pub fn canonicalize(y: &Points) -> Points {
    let p = y.dim();
    let y = y.centered();
    let mut c = vec![0.0; p * p];
    for a in 0..p {
        for b in a..p {
            let col: Vec<f64> = y.rows().map(|r| r[a] * r[b]).collect();
            let v = tree_sum(&col);
            c[a * p + b] = v;
            c[b * p + a] = v;
        }
    }
    let eig = jacobi_eigen(&c, p);
    let mut out = y.map_linear(&eig.vectors.concat(), p);
    let scale = out.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for a in 0..p {
        let mut sign = 0.0;
        for power in [3, 5, 1] {
            let col: Vec<f64> = out.rows().map(|r| r[a].powi(power)).collect();
            let m = tree_sum(&col);
            if m.abs() > 1e-9 * scale.powi(power) * out.len() as f64 {
                sign = m.signum();
                break;
            }
        }
        if sign == 0.0 {
            sign = out
                .rows()
                .map(|r| r[a])
                .find(|v| v.abs() > 1e-12 * scale)
                .map_or(1.0, f64::signum);
        }
        if sign < 0.0 {
            for i in 0..out.len() {
                out.row_mut(i)[a] = -out.row(i)[a];
            }
        }
    }
    out
}

/// Shrinks `y` by the smallest factor after which every edge exceeds its
/// input length by at most `slack`.
fn scale_to_feasible(y: &mut Points, g: &NeighborGraph, slack: f64) {
    let factor = g
        .edges
        .iter()
        .map(|e| {
            let len = dist(y.row(e.i), y.row(e.j));
            if len > e.length + slack {
                (e.length + slack) / len
            } else {
                1.0
            }
        })
        .fold(1.0, f64::min);
    if factor < 1.0 {
        // A few ulps of margin so rounding cannot undo the repair.
        y.scale(factor * (1.0 - 4.0 * f64::EPSILON));
    }
}

struct StartResult {
    y: Points,
    energy: f64,
    records: Vec<TraceRecord>,
    converged: bool,
}

fn run_start(
    g: &NeighborGraph,
    lap: &GroundedLaplacian,
    z0: Vec<f64>,
    dim: usize,
    objective: Objective,
    cfg: &SolverConfig,
) -> Result<StartResult> {
    let n = g.n;
    let r = g.r;
    let prob = EdgeSplitting {
        n,
        dim,
        edges: g.edges.iter().map(|e| (e.i, e.j, e.length / r)).collect(),
        weight: 1.0 / n as f64,
        objective,
    };
    let rho_floor = prob.weight / lap.algebraic_connectivity(CONNECTIVITY_ITERATIONS);
    let mut st = prob.start(z0, cfg.initial_penalty * rho_floor);
    let to_points = |z: &[f64]| {
        let mut y = Points::new(dim, z.to_vec());
        y.scale(r);
        y
    };
    let mut records = Vec::new();
    let mut prev_energy = f64::NAN;
    let mut best_feasible: Option<f64> = None;
    let mut converged = false;
    let mut best_primal = f64::INFINITY;
    let mut since_best = 0;
    for outer in 0..cfg.max_outer {
        let stats = prob.sweep(lap, &mut st, cfg.max_inner, cfg.relaxation);
        if st.z.iter().any(|v| !v.is_finite()) {
            return Err(MvuError::NumericalFailure(format!(
                "non-finite iterate at outer iteration {outer}"
            )));
        }
        let y = to_points(&st.z);
        let energy = energy_discrete(&y);
        let max_violation = g
            .edges
            .iter()
            .map(|e| dist(y.row(e.i), y.row(e.j)) - e.length)
            .fold(0.0, f64::max);
        let feasible = max_violation <= cfg.feas_tol * r;
        if feasible {
            best_feasible = Some(best_feasible.map_or(energy, |b| b.max(energy)));
        }
        records.push(TraceRecord {
            iter: outer,
            energy,
            max_violation,
            penalty: st.rho,
            steps: cfg.max_inner,
            best_feasible,
        });
        let settled = prev_energy.is_finite() && (energy - prev_energy).abs() <= cfg.stop_tol * energy.abs();
        if stats.primal_max <= cfg.feas_tol && settled {
            converged = true;
            break;
        }
        prev_energy = energy;
        // Grow the penalty when the primal residual stops halving.
        if stats.primal_max < 0.5 * best_primal {
            best_primal = stats.primal_max;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= PENALTY_PATIENCE {
                EdgeSplitting::rescale_penalty(&mut st, cfg.penalty_growth);
                best_primal = stats.primal_max;
                since_best = 0;
            }
        }
    }
    let mut y = to_points(&st.z);
    y.center();
    scale_to_feasible(&mut y, g, 0.5 * cfg.feas_tol * r);
    y.center();
    let energy = energy_discrete(&y);
    Ok(StartResult {
        y,
        energy,
        records,
        converged,
    })
}

/// Gaussian coordinates smoothed by neighbor averaging, then shrunk until
/// feasible, in normalized units.
fn random_start(g: &NeighborGraph, dim: usize, seed: u64) -> Vec<f64> {
    let n = g.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<f64> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut next = vec![0.0; n * dim];
    for _ in 0..SMOOTHING_PASSES {
        for v in 0..n {
            let nb = g.neighbors(v);
            for a in 0..dim {
                let s: f64 = nb.iter().map(|&(w, _)| z[w * dim + a]).sum();
                next[v * dim + a] = (z[v * dim + a] + s) / (nb.len() + 1) as f64;
            }
        }
        std::mem::swap(&mut z, &mut next);
    }
    let mut y = Points::new(dim, z);
    y.center();
    y.scale(g.r);
    scale_to_feasible(&mut y, g, 0.0);
    // Blow up to the tightest edge when the smoothed start is slack everywhere.
    let worst = g
        .edges
        .iter()
        .map(|e| dist(y.row(e.i), y.row(e.j)) / e.length)
        .fold(0.0, f64::max);
    if worst > 0.0 && worst < 1.0 {
        y.scale((1.0 - 4.0 * f64::EPSILON) / worst);
    }
    y.scale(1.0 / g.r);
    y.into_vec()
}

fn check_inputs(cloud: &PointCloud, g: &NeighborGraph, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if cloud.n() != g.n {
        return Err(invalid(format!("graph has {} vertices but the cloud has {} points", g.n, cloud.n())));
    }
    if g.n < 2 {
        return Err(invalid("need at least two points"));
    }
    g.require_connected()
}

/// Two points joined by one edge: stretch it tight along the input direction.
fn two_point_solution(cloud: &PointCloud, g: &NeighborGraph, dim: usize) -> Points {
    let x = &cloud.points;
    let mut y = Points::zeros(2, dim);
    let len = g.edges[0].length;
    let d = dist(x.row(0), x.row(1));
    for a in 0..dim.min(x.dim()) {
        let u = if d > 0.0 { (x.row(1)[a] - x.row(0)[a]) / d } else if a == 0 { 1.0 } else { 0.0 };
        y.row_mut(0)[a] = -0.5 * len * u;
        y.row_mut(1)[a] = 0.5 * len * u;
    }
    y
}

fn solve_with(
    cloud: &PointCloud,
    g: &NeighborGraph,
    cfg: &SolverConfig,
    dim: usize,
    objective: Objective,
    identity: impl Fn() -> Vec<f64> + Sync,
) -> Result<(Embedding, SolveTrace)> {
    check_inputs(cloud, g, cfg)?;
    let elapsed = crate::stopwatch();
    let pairs: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.i, e.j)).collect();
    let lap = GroundedLaplacian::new(g.n, &pairs).ok_or(MvuError::DisconnectedGraph {
        components: g.components,
    })?;
    if g.n == 2 {
        let y = two_point_solution(cloud, g, dim);
        let emb = Embedding::from_points(y, g);
        let trace = SolveTrace {
            records: vec![TraceRecord {
                iter: 0,
                energy: emb.energy,
                max_violation: emb.max_violation,
                penalty: 0.0,
                steps: 0,
                best_feasible: Some(emb.energy),
            }],
            wall_time: elapsed(),
            converged: true,
            start_energies: vec![emb.energy],
            best_start: 0,
        };
        return Ok((emb, trace));
    }
    let use_identity = cfg.init == Init::Identity;
    let starts = cfg.restarts + if use_identity { 1 } else { 0 };
    let starts = starts.max(1);
    let results: Vec<Result<StartResult>> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let z0 = if use_identity && k == 0 {
                identity()
            } else {
                random_start(g, dim, crate::derive_seed(cfg.seed, k as u64))
            };
            run_start(g, &lap, z0, dim, objective, cfg)
        })
        .collect();
    let mut best: Option<(usize, StartResult)> = None;
    let mut start_energies = Vec::with_capacity(starts);
    let mut first_err = None;
    for (k, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => {
                start_energies.push(s.energy);
                // Strict improvement only, so ties resolve to the earliest start.
                if best.as_ref().map_or(true, |(_, b)| s.energy > b.energy) {
                    best = Some((k, s));
                }
            }
            Err(e) => {
                start_energies.push(f64::NAN);
                first_err.get_or_insert(e);
            }
        }
    }
    let (best_start, best) = match best {
        Some(b) => b,
        None => return Err(first_err.expect("no starts ran")),
    };
    let emb = Embedding::from_points(canonicalize(&best.y), g);
    let trace = SolveTrace {
        records: best.records,
        wall_time: elapsed(),
        converged: best.converged,
        start_energies,
        best_start,
    };
    Ok((emb, trace))
}

/// Coordinate backend: optimizes `Y` in the ambient dimension of the cloud.
///
/// A start that exhausts `max_outer` is still returned (shrunk to exact
/// feasibility) with `trace.converged == false`.
pub fn solve_mvu(cloud: &PointCloud, g: &NeighborGraph, cfg: &SolverConfig) -> Result<(Embedding, SolveTrace)> {
    let x = &cloud.points;
    let p = x.dim();
    let r = g.r;
    solve_with(cloud, g, cfg, p, Objective::Variance, || {
        let mut z = x.centered();
        z.scale(1.0 / r);
        z.into_vec()
    })
}

/// Gram backend: optimizes a rank-`k` factor `V` (`K = V V^T`) with the
/// factor's rows constrained to sum to zero. The returned embedding is the
/// factor itself, so it has `k` columns.
pub fn solve_mvu_gram(cloud: &PointCloud, g: &NeighborGraph, cfg: &SolverConfig) -> Result<(Embedding, SolveTrace)> {
    let x = &cloud.points;
    let p = x.dim();
    let k = cfg.rank_cap.unwrap_or(p.min(10));
    let r = g.r;
    let seed = cfg.seed;
    solve_with(cloud, g, cfg, k, Objective::TraceCentered, move || {
        let mut xc = x.centered();
        xc.scale(1.0 / r);
        let mut v = xc.with_dim(k);
        if k < p {
            // Project onto the leading principal axes so the start is feasible.
            if let Ok(c) = extract_from_points(&xc, k) {
                v = c.coords;
            }
        } else if k > p {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_F42D_4C95_7F2D);
            for i in 0..v.len() {
                for a in p..k {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v.row_mut(i)[a] = 1e-3 * e;
                }
            }
        }
        v.into_vec()
    })
}

/// Runs the backend selected in `cfg`.
pub fn solve(cloud: &PointCloud, g: &NeighborGraph, cfg: &SolverConfig) -> Result<(Embedding, SolveTrace)> {
    match cfg.backend {
        Backend::CoordinateAscent => solve_mvu(cloud, g, cfg),
        Backend::GramLowRank => solve_mvu_gram(cloud, g, cfg),
    }
}
