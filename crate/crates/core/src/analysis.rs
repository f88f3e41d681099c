//! Judging solver output: rigid alignment to a reference, Lipschitz ratios,
//! the interpolation margin and the U-statistic tail experiment.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::derive_seed;
use crate::eigen::{det_small, jacobi_eigen, svd_jacobi};
use crate::error::{invalid, MvuError, Result};
use crate::graph::{graph_geodesics, NeighborGraph};
use crate::manifolds::{sample_points, ManifoldModel, PointCloud};
use crate::points::{dist, tree_sum, Points};
use crate::solver::{energy_discrete, extract_coordinates, Embedding};

/// Pairs closer than this (in the reference metric) are skipped by ratios.
pub const MIN_PAIR_DISTANCE: f64 = 1e-9;
/// Trace share at which an embedding counts as flattened to dimension `d`.
pub const FLAT_THRESHOLD: f64 = 0.99;

/// Optimal rigid motion `a -> a Q + t` onto `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    /// Row-major `d x d` orthogonal matrix acting on row vectors.
    pub rotation: Vec<f64>,
    pub dim: usize,
    pub reflection: bool,
    pub translation: Vec<f64>,
    pub max_residual: f64,
    pub rms_residual: f64,
    /// One side had zero spread; the identity rotation was used.
    pub degenerate: bool,
}

impl Alignment {
    pub fn apply(&self, a: &Points) -> Points {
        let a = a.with_dim(self.dim);
        let d = self.dim;
        let mut out = Points::zeros(a.len(), d);
        for i in 0..a.len() {
            let x = a.row(i);
            let y = out.row_mut(i);
            for c in 0..d {
                y[c] = (0..d).map(|k| x[k] * self.rotation[k * d + c]).sum::<f64>() + self.translation[c];
            }
        }
        out
    }
}

/// Orthogonal Procrustes: minimizes `sum_i |a_i Q + t - b_i|^2` over
/// orthogonal `Q` (reflections included) and translations `t`.
///
/// Inputs of different widths are zero-padded to the larger one.
pub fn procrustes_align(a: &Points, b: &Points) -> Result<Alignment> {
    if a.len() != b.len() {
        return Err(invalid(format!("row counts differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(invalid("cannot align empty point sets"));
    }
    let d = a.dim().max(b.dim());
    let (pa, pb) = (a.with_dim(d), b.with_dim(d));
    let (ma, mb) = (pa.mean(), pb.mean());
    let (ca, cb) = (pa.centered(), pb.centered());
    let mut h = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            let terms: Vec<f64> = ca.rows().zip(cb.rows()).map(|(x, y)| x[r] * y[c]).collect();
            h[r * d + c] = tree_sum(&terms);
        }
    }
    let scale_a = ca.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale_b = cb.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = scale_a <= 1e-300 || scale_b <= 1e-300;
    let rotation = if degenerate {
        let mut q = vec![0.0; d * d];
        (0..d).for_each(|k| q[k * d + k] = 1.0);
        q
    } else {
        let svd = svd_jacobi(&h, d, d);
        let mut q = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                q[r * d + c] = (0..d).map(|k| svd.u[r * d + k] * svd.v[c * d + k]).sum();
            }
        }
        q
    };
    let reflection = !degenerate && det_small(&rotation, d) < 0.0;
    let translation: Vec<f64> = (0..d)
        .map(|c| mb[c] - (0..d).map(|k| ma[k] * rotation[k * d + c]).sum::<f64>())
        .collect();
    let mut al = Alignment {
        rotation,
        dim: d,
        reflection,
        translation,
        max_residual: 0.0,
        rms_residual: 0.0,
        degenerate,
    };
    let moved = al.apply(&pa);
    let res: Vec<f64> = moved.rows().zip(pb.rows()).map(|(x, y)| dist(x, y)).collect();
    al.max_residual = res.iter().copied().fold(0.0, f64::max);
    let sq: Vec<f64> = res.iter().map(|v| v * v).collect();
    al.rms_residual = (tree_sum(&sq) / res.len() as f64).sqrt();
    Ok(al)
}

/// Max Procrustes residual between the top-`d` principal coordinates of the
/// embedding and the reference coordinates `psi(x_i)`.
pub fn solution_distance(emb: &Embedding, cloud: &PointCloud) -> Result<f64> {
    let model = &cloud.model;
    if !model.has_isometry {
        return Err(MvuError::NoIsometry(model.name.clone()));
    }
    let reference = model.reference_coordinates(&cloud.points)?;
    let coords = extract_coordinates(emb, model.intrinsic_dim)?;
    Ok(procrustes_align(&coords.coords, &reference)?.max_residual)
}

/// Alignment of the full embedding to the input points themselves, i.e. to
/// the identity map on the sampled set.
pub fn identity_recovery(emb: &Embedding, cloud: &PointCloud) -> Result<Alignment> {
    procrustes_align(&emb.y, &cloud.points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistanceSource {
    /// Exact intrinsic distance of the model.
    Oracle,
    /// Shortest paths in the neighborhood graph.
    Graph,
}

/// Row-major `n x n` reference distances between the cloud points.
pub fn pairwise_distances(cloud: &PointCloud, g: &NeighborGraph, source: DistanceSource) -> Result<Vec<f64>> {
    let n = cloud.n();
    match source {
        DistanceSource::Graph => {
            g.require_connected()?;
            Ok(graph_geodesics(g))
        }
        DistanceSource::Oracle => {
            let model = &cloud.model;
            if !model.has_oracle() {
                return Err(MvuError::NoOracle(model.name.clone()));
            }
            let pts = &cloud.points;
            let rows: Vec<Result<Vec<f64>>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut row = vec![0.0; n];
                    for j in (i + 1)..n {
                        row[j] = model.intrinsic_distance_unchecked(pts.row(i), pts.row(j))?;
                    }
                    Ok(row)
                })
                .collect();
            let mut out = vec![0.0; n * n];
            for (i, row) in rows.into_iter().enumerate() {
                let row = row?;
                for j in (i + 1)..n {
                    out[i * n + j] = row[j];
                    out[j * n + i] = row[j];
                }
            }
            Ok(out)
        }
    }
}

/// The oracle when the model has one, graph geodesics otherwise.
pub fn default_source(model: &ManifoldModel) -> DistanceSource {
    if model.has_oracle() {
        DistanceSource::Oracle
    } else {
        DistanceSource::Graph
    }
}

/// `max_{i<j} |y_i - y_j| / delta_ij` over pairs with `delta_ij > 1e-9`.
pub fn lipschitz_from_distances(y: &Points, delta: &[f64]) -> f64 {
    let n = y.len();
    assert_eq!(delta.len(), n * n);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in (i + 1)..n {
                let dl = delta[i * n + j];
                if dl > MIN_PAIR_DISTANCE {
                    best = best.max(y.dist(i, j) / dl);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

pub fn empirical_lipschitz(
    emb: &Embedding,
    cloud: &PointCloud,
    g: &NeighborGraph,
    source: DistanceSource,
) -> Result<f64> {
    let delta = pairwise_distances(cloud, g, source)?;
    Ok(lipschitz_from_distances(&emb.y, &delta))
}

/// `max_{i<j} |y_i - y_j| - (1 + 6 eta / r) delta_ij`.
pub fn interpolation_margin(y: &Points, delta: &[f64], eta: f64, r: f64) -> f64 {
    let n = y.len();
    assert_eq!(delta.len(), n * n);
    let factor = 1.0 + 6.0 * eta / r;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = f64::NEG_INFINITY;
            for j in (i + 1)..n {
                worst = worst.max(y.dist(i, j) - factor * delta[i * n + j]);
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Share of the centered second-moment trace held by the top `d`
/// eigenvalues. An embedding of rank at most `d` gives 1.
pub fn flatness_report(y: &Points, d: usize) -> f64 {
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
    let spectrum: Vec<f64> = jacobi_eigen(&c, p).values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = spectrum.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    spectrum.iter().take(d).sum::<f64>() / total
}

/// Everything recorded about one solved instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub n: usize,
    pub r: f64,
    pub seed: u64,
    pub energy: f64,
    pub continuum_energy: Option<f64>,
    pub energy_gap: Option<f64>,
    /// Max Procrustes residual to `psi` (isometry models) or to the identity
    /// on the sample (everything else).
    pub procrustes_error: f64,
    pub identity_recovery: bool,
    pub lipschitz_oracle: Option<f64>,
    pub lipschitz_graph: Option<f64>,
    pub covering_radius: f64,
    /// Computed with the oracle when available, graph geodesics otherwise.
    pub interpolation_margin: f64,
    pub max_violation: f64,
    pub trace_fraction: f64,
    pub config_hash: String,
}

/// Gathers a [`RecoveryReport`]. `eta` is the measured covering radius.
pub fn recovery_report(
    cloud: &PointCloud,
    g: &NeighborGraph,
    emb: &Embedding,
    continuum_energy: Option<f64>,
    eta: f64,
    config_hash: &str,
) -> Result<RecoveryReport> {
    let model = &cloud.model;
    let (procrustes_error, identity_recovery) = if model.has_isometry {
        (solution_distance(emb, cloud)?, false)
    } else {
        (self::identity_recovery(emb, cloud)?.max_residual, true)
    };
    let oracle = if model.has_oracle() {
        Some(pairwise_distances(cloud, g, DistanceSource::Oracle)?)
    } else {
        None
    };
    let graph = if g.connected {
        Some(pairwise_distances(cloud, g, DistanceSource::Graph)?)
    } else {
        None
    };
    let lipschitz_oracle = oracle.as_ref().map(|d| lipschitz_from_distances(&emb.y, d));
    let lipschitz_graph = graph.as_ref().map(|d| lipschitz_from_distances(&emb.y, d));
    let reference = oracle
        .as_ref()
        .or(graph.as_ref())
        .ok_or(MvuError::DisconnectedGraph { components: g.components })?;
    Ok(RecoveryReport {
        n: cloud.n(),
        r: g.r,
        seed: cloud.seed,
        energy: emb.energy,
        continuum_energy,
        energy_gap: continuum_energy.map(|c| (emb.energy - c).abs()),
        procrustes_error,
        identity_recovery,
        lipschitz_oracle,
        lipschitz_graph,
        covering_radius: eta,
        interpolation_margin: interpolation_margin(&emb.y, reference, eta, g.r),
        max_violation: emb.max_violation,
        trace_fraction: flatness_report(&emb.y, model.intrinsic_dim),
        config_hash: config_hash.to_string(),
    })
}

pub const RECOVERY_HEADER: &str = "n,r,seed,energy,continuum_energy,energy_gap,procrustes_error,identity_recovery,\
lipschitz_oracle,lipschitz_graph,covering_radius,interpolation_margin,max_violation,trace_fraction,config_hash";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.16e}"))
}

pub fn recovery_csv(rows: &[RecoveryReport]) -> String {
    let mut out = format!("{RECOVERY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.16e},{},{:.16e},{},{},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.n,
            r.r,
            r.seed,
            r.energy,
            opt(r.continuum_energy),
            opt(r.energy_gap),
            r.procrustes_error,
            r.identity_recovery,
            opt(r.lipschitz_oracle),
            opt(r.lipschitz_graph),
            r.covering_radius,
            r.interpolation_margin,
            r.max_violation,
            r.trace_fraction,
            r.config_hash
        );
    }
    out
}

/// One threshold of the tail experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    pub exceedances: usize,
    pub frequency: f64,
    /// Binomial standard error `sqrt(p (1 - p) / trials)`.
    pub std_error: f64,
    /// `2 exp(-n t^2 / (5 D^4 + 3 D^2 t))` with `D` the diameter.
    pub bound: f64,
    pub within_bound: bool,
}

/// Two-sided tail bound for the energy of `n` points in a set of diameter `diam`.
pub fn ustat_bound(n: usize, t: f64, diam: f64) -> f64 {
    let d2 = diam * diam;
    2.0 * (-(n as f64) * t * t / (5.0 * d2 * d2 + 3.0 * d2 * t)).exp()
}

/// Repeats `trials` independent samples of size `n`, maps them through `f`
/// and records how often the sample energy misses `reference` by more than
/// each `t`. Trial `k` uses `derive_seed(seed, k)`.
pub fn ustat_tail_experiment<F>(
    model: &ManifoldModel,
    f: F,
    n: usize,
    t_grid: &[f64],
    trials: usize,
    seed: u64,
    reference: f64,
) -> Result<Vec<TailRow>>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if trials < 1000 {
        return Err(invalid(format!("tail experiment needs at least 1000 trials, got {trials}")));
    }
    if n < 2 {
        return Err(invalid("tail experiment needs n >= 2"));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("t-grid values must be finite and non-negative"));
    }
    let deviations: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let x = sample_points(model, n, derive_seed(seed, k as u64));
            let rows: Vec<Vec<f64>> = x.rows().map(&f).collect();
            (energy_discrete(&Points::from_rows(&rows)) - reference).abs()
        })
        .collect();
    let m = trials as f64;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let exceedances = deviations.iter().filter(|&&v| v > t).count();
            let p = exceedances as f64 / m;
            let std_error = (p * (1.0 - p) / m).sqrt();
            let bound = ustat_bound(n, t, model.diameter);
            TailRow {
                t,
                exceedances,
                frequency: p,
                std_error,
                bound,
                within_bound: p <= bound + 3.0 * std_error,
            }
        })
        .collect())
}

pub fn tail_csv(rows: &[TailRow], config_hash: &str) -> String {
    let mut out = String::from("t,exceedances,frequency,std_error,bound,within_bound,config_hash\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{},{}",
            r.t, r.exceedances, r.frequency, r.std_error, r.bound, r.within_bound, config_hash
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn sample_2d() -> Points {
        Points::from_rows(&[[0.0, 0.0], [1.0, 0.2], [0.3, 2.0], [-1.0, 0.5], [0.4, -0.7]])
    }

    #[test]
    fn rotated_and_shifted_copy_aligns_exactly() {
        let a = sample_2d();
        let (s, c) = FRAC_PI_2.sin_cos();
        let b = Points::from_rows(
            &a.rows()
                .map(|r| [c * r[0] - s * r[1] + 3.0, s * r[0] + c * r[1] - 1.0])
                .collect::<Vec<_>>(),
        );
        let al = procrustes_align(&a, &b).unwrap();
        assert!(al.max_residual < 1e-12);
        assert!(!al.reflection && !al.degenerate);
    }

    #[test]
    fn negation_is_found_as_rotation_in_the_plane() {
        // In two dimensions -I is a rotation by pi.
        let a = sample_2d();
        let al = procrustes_align(&a, &a.scaled(-1.0)).unwrap();
        assert!(al.max_residual < 1e-12);
        assert!(!al.reflection);
        // A mirror image needs a reflection.
        let m = Points::from_rows(&a.rows().map(|r| [-r[0], r[1]]).collect::<Vec<_>>());
        let al = procrustes_align(&a, &m).unwrap();
        assert!(al.max_residual < 1e-12 && al.reflection);
    }

    #[test]
    fn point_masses_are_flagged_degenerate() {
        let a = Points::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let b = Points::from_rows(&[[0.0, 0.0], [2.0, 0.0]]);
        let al = procrustes_align(&a, &b).unwrap();
        assert!(al.degenerate);
        assert!((al.max_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_and_margin_on_a_line() {
        let y = Points::from_rows(&[[0.0], [1.0], [3.0]]);
        let delta = vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0];
        assert!((lipschitz_from_distances(&y, &delta) - 2.0).abs() < 1e-15);
        assert!((interpolation_margin(&y, &delta, 0.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flatness_of_planar_and_degenerate_sets() {
        let y = sample_2d().with_dim(4);
        assert!((flatness_report(&y, 2) - 1.0).abs() < 1e-12);
        assert_eq!(flatness_report(&Points::zeros(3, 2), 1), 1.0);
    }

    #[test]
    fn bound_at_zero_is_vacuous() {
        assert_eq!(ustat_bound(100, 0.0, 1.0), 2.0);
    }
}
