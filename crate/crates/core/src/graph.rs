//! r-neighborhood graphs over point clouds, covering/packing estimators and
//! graph geodesics.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, MvuError, Result};
use crate::manifolds::PointCloud;
use crate::points::{dist, Points};

/// Above this size the edge scan switches from all pairs to grid buckets.
pub const BRUTE_FORCE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

/// Edge `(i, j)` with `i < j` is present iff `|x_i - x_j| <= r`.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    pub n: usize,
    pub r: f64,
    pub edges: Vec<Edge>,
    pub components: usize,
    pub connected: bool,
    /// Filled in by [`NeighborGraph::with_covering_radius`].
    pub covering_radius: Option<f64>,
    offsets: Vec<usize>,
    adjacency: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphDiagnostics {
    pub n: usize,
    pub r: f64,
    pub edges: usize,
    pub connected: bool,
    pub components: usize,
    pub covering_radius: Option<f64>,
    /// `covering_radius / r`, the empirical stand-in for `lambda_n`.
    pub lambda_hat: Option<f64>,
}

impl NeighborGraph {
    pub fn from_edges(n: usize, r: f64, mut edges: Vec<Edge>) -> Self {
        edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0usize, 0.0f64); offsets[n]];
        for e in &edges {
            adjacency[fill[e.i]] = (e.j, e.length);
            fill[e.i] += 1;
            adjacency[fill[e.j]] = (e.i, e.length);
            fill[e.j] += 1;
        }
        let components = count_components(n, &edges);
        Self {
            n,
            r,
            edges,
            components,
            connected: components <= 1,
            covering_radius: None,
            offsets,
            adjacency,
        }
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn with_covering_radius(mut self, eta: f64) -> Self {
        self.covering_radius = Some(eta);
        self
    }

    pub fn diagnostics(&self) -> GraphDiagnostics {
        GraphDiagnostics {
            n: self.n,
            r: self.r,
            edges: self.edges.len(),
            connected: self.connected,
            components: self.components,
            covering_radius: self.covering_radius,
            lambda_hat: self.covering_radius.map(|e| e / self.r),
        }
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.connected {
            Ok(())
        } else {
            Err(MvuError::DisconnectedGraph {
                components: self.components,
            })
        }
    }

    /// CSV edge list with header `i,j,length`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,length\n");
        for e in &self.edges {
            s.push_str(&format!("{},{},{:.16e}\n", e.i, e.j, e.length));
        }
        s
    }
}

fn count_components(n: usize, edges: &[Edge]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut comps = n;
    for e in edges {
        let a = find(&mut parent, e.i);
        let b = find(&mut parent, e.j);
        if a != b {
            parent[a.max(b)] = a.min(b);
            comps -= 1;
        }
    }
    comps
}

/// Builds the r-neighborhood graph of a cloud.
pub fn build_graph(cloud: &PointCloud, r: f64) -> Result<NeighborGraph> {
    build_graph_points(&cloud.points, r)
}

pub fn build_graph_points(points: &Points, r: f64) -> Result<NeighborGraph> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("radius r={r} must be positive")));
    }
    let edges = if points.len() <= BRUTE_FORCE_LIMIT {
        edges_brute_force(points, r)
    } else {
        edges_grid(points, r)
    };
    Ok(NeighborGraph::from_edges(points.len(), r, edges))
}

pub(crate) fn edges_brute_force(points: &Points, r: f64) -> Vec<Edge> {
    let n = points.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            ((i + 1)..n).filter_map(move |j| {
                let length = dist(points.row(i), points.row(j));
                (length <= r).then_some(Edge { i, j, length })
            })
        })
        .collect()
}

/// Uniform-grid bucketing with cell side `r`.
pub(crate) fn edges_grid(points: &Points, r: f64) -> Vec<Edge> {
    let index = GridIndex::new(points, r);
    let n = points.len();
    let mut edges: Vec<Edge> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = points.row(i);
            let mut out = Vec::new();
            index.for_each_in_radius(x, 1, |j| {
                if j > i {
                    let length = dist(x, points.row(j));
                    if length <= r {
                        out.push(Edge { i, j, length });
                    }
                }
            });
            out
        })
        .collect();
    edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    edges
}

/// Hash grid over points in any dimension.
pub struct GridIndex<'a> {
    points: &'a Points,
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a Points, cell: f64) -> Self {
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, x) in points.rows().enumerate() {
            buckets.entry(Self::key_of(x, cell)).or_default().push(i);
        }
        Self {
            points,
            cell,
            buckets,
        }
    }

    fn key_of(x: &[f64], cell: f64) -> Vec<i64> {
        x.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    /// Visits every point in cells within `rings` of the query's cell.
    pub fn for_each_in_radius<F: FnMut(usize)>(&self, x: &[f64], rings: i64, mut f: F) {
        let base = Self::key_of(x, self.cell);
        let dim = base.len();
        let width = (2 * rings + 1) as usize;
        let total = width.pow(dim as u32);
        let mut key = base.clone();
        for code in 0..total {
            let mut c = code;
            for k in 0..dim {
                key[k] = base[k] + (c % width) as i64 - rings;
                c /= width;
            }
            if let Some(b) = self.buckets.get(&key) {
                b.iter().for_each(|&j| f(j));
            }
        }
    }

    /// Distance from `x` to its nearest indexed point.
    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        let mut rings = 1;
        loop {
            self.for_each_in_radius(x, rings, |j| {
                best = best.min(dist(x, self.points.row(j)));
            });
            // Everything within `rings * cell` of x has been examined.
            if best <= rings as f64 * self.cell || rings > 64 {
                break;
            }
            rings *= 2;
        }
        if best.is_infinite() {
            best = self
                .points
                .rows()
                .map(|p| dist(x, p))
                .fold(f64::INFINITY, f64::min);
        }
        best
    }
}

/// Largest distance from a probe point to its nearest data point: an
/// estimate of the smallest `eta` for which the data form an eta-covering.
pub fn covering_radius(cloud: &PointCloud, probe: &PointCloud) -> Result<f64> {
    if probe.model.name != cloud.model.name {
        return Err(MvuError::ProbeMismatch {
            probe: probe.model.name.clone(),
            cloud: cloud.model.name.clone(),
        });
    }
    if probe.n() < 50 * cloud.n() {
        return Err(invalid(format!(
            "probe has {} points, need at least 50 * n = {}",
            probe.n(),
            50 * cloud.n()
        )));
    }
    Ok(covering_radius_points(&cloud.points, &probe.points))
}

pub fn covering_radius_points(data: &Points, probe: &Points) -> f64 {
    let n = data.len().max(1) as f64;
    let dim = data.dim() as f64;
    // Cell side near the typical spacing, using the bounding box extent.
    let mut extent: f64 = 0.0;
    for k in 0..data.dim() {
        let (lo, hi) = data
            .rows()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[k]), hi.max(r[k])));
        extent = extent.max(hi - lo);
    }
    let cell = (extent.max(1e-12) / n.powf(1.0 / dim)).max(1e-9);
    let index = GridIndex::new(data, cell);
    probe
        .as_slice()
        .par_chunks_exact(probe.dim())
        .map(|x| index.nearest_distance(x))
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from one source; unreachable vertices get `+inf`.
pub fn shortest_paths_from(g: &NeighborGraph, source: usize) -> Vec<f64> {
    let mut distv = vec![f64::INFINITY; g.n];
    let mut heap = BinaryHeap::new();
    distv[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, v)) = heap.pop() {
        if d > distv[v] {
            continue;
        }
        for &(w, len) in g.neighbors(v) {
            let nd = d + len;
            if nd < distv[w] {
                distv[w] = nd;
                heap.push(HeapItem(nd, w));
            }
        }
    }
    distv
}

/// Row-major `n x n` all-pairs graph distances, one Dijkstra per source.
/// Symmetrized by taking the minimum of the two directions.
pub fn graph_geodesics(g: &NeighborGraph) -> Vec<f64> {
    let n = g.n;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| shortest_paths_from(g, s))
        .collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = rows[i][j].min(rows[j][i]);
        }
    }
    out
}

/// Size of a greedy maximal eta-packing: points are scanned in a seeded
/// random order and kept when farther than `eta` from every kept point.
pub fn packing_number(points: &Points, eta: f64, seed: u64) -> Result<usize> {
    if !(eta > 0.0) {
        return Err(invalid(format!("eta={eta} must be positive")));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(greedy_packing(points, eta, &order).len())
}

/// Greedy packing in a caller-supplied order; returns the kept indices.
pub fn greedy_packing(points: &Points, eta: f64, order: &[usize]) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let dim = points.dim();
    let width = 3usize;
    for &i in order {
        let x = points.row(i);
        let base: Vec<i64> = x.iter().map(|v| (v / eta).floor() as i64).collect();
        let mut free = true;
        let mut key = base.clone();
        'cells: for code in 0..width.pow(dim as u32) {
            let mut c = code;
            for k in 0..dim {
                key[k] = base[k] + (c % width) as i64 - 1;
                c /= width;
            }
            if let Some(b) = buckets.get(&key) {
                for &j in b {
                    if dist(x, points.row(j)) <= eta {
                        free = false;
                        break 'cells;
                    }
                }
            }
        }
        if free {
            kept.push(i);
            buckets.entry(base).or_default().push(i);
        }
    }
    kept
}

/// Critical covering scale `(log n / (alpha n))^(1/d)`.
pub fn critical_radius(n: usize, d: usize, alpha: f64) -> f64 {
    let n = n as f64;
    (n.ln() / (alpha * n)).powf(1.0 / d as f64)
}

/// Neighborhood radius `C (log n / n)^(1/d) * log log max(n, 3)`.
pub fn radius_schedule(n: usize, d: usize, c: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("radius_schedule needs n >= 2"));
    }
    if !(c > 0.0) || d == 0 {
        return Err(invalid("radius_schedule needs C > 0 and d >= 1"));
    }
    Ok(radius_schedule_real(n as f64, d, c))
}

/// Real-argument form of [`radius_schedule`].
pub fn radius_schedule_real(n: f64, d: usize, c: f64) -> f64 {
    let slack = n.max(3.0).ln().ln();
    c * (n.ln() / n).powf(1.0 / d as f64) * slack
}
