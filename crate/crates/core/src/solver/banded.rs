//! Grounded graph-Laplacian solves via reverse Cuthill-McKee ordering and a
//! banded Cholesky factor.

use std::collections::VecDeque;

/// Factor of the unweighted Laplacian of a connected graph with one vertex
/// pinned to zero, which makes the reduced matrix positive definite.
#[derive(Debug, Clone)]
pub struct GroundedLaplacian {
    n: usize,
    /// `perm[k]` is the vertex stored at position `k`; the last one is grounded.
    perm: Vec<usize>,
    band: usize,
    /// Row-major lower band: `l[k * (band + 1) + (band - (k - j))]` holds `L[k][j]`.
    l: Vec<f64>,
}

/// Reverse Cuthill-McKee order of a connected graph given by adjacency lists.
pub fn rcm_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let start = (0..n).min_by_key(|&v| (adj[v].len(), v)).unwrap_or(0);
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // Two passes: the second starts from the last vertex reached, which is
    // a pseudo-peripheral vertex and usually yields a narrower band.
    let bfs = |root: usize, seen: &mut Vec<bool>, order: &mut Vec<usize>| {
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            nb.sort_by_key(|&w| (adj[w].len(), w));
            nb.dedup();
            for w in nb {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    };
    bfs(start, &mut seen, &mut order);
    let far = *order.last().unwrap_or(&start);
    seen.iter_mut().for_each(|s| *s = false);
    order.clear();
    bfs(far, &mut seen, &mut order);
    // Disconnected leftovers (not expected for solver input) go last.
    for v in 0..n {
        if !seen[v] {
            bfs(v, &mut seen, &mut order);
        }
    }
    order.reverse();
    order
}

impl GroundedLaplacian {
    /// Factors the Laplacian of the graph on `n` vertices with the given edges.
    /// Returns `None` if the grounded matrix is not positive definite, which
    /// happens exactly when the graph is disconnected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Option<Self> {
        assert!(n >= 2);
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let perm = rcm_order(&adj);
        let mut pos = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            pos[v] = k;
        }
        let m = n - 1;
        let band = edges
            .iter()
            .filter(|&&(i, j)| pos[i] < m && pos[j] < m)
            .map(|&(i, j)| pos[i].abs_diff(pos[j]))
            .max()
            .unwrap_or(0);
        let w = band + 1;
        let mut l = vec![0.0f64; m * w];
        for &(i, j) in edges {
            let (a, b) = (pos[i], pos[j]);
            if a < m {
                l[a * w + band] += 1.0;
            }
            if b < m {
                l[b * w + band] += 1.0;
            }
            if a < m && b < m && a != b {
                let (hi, lo) = if a > b { (a, b) } else { (b, a) };
                l[hi * w + band - (hi - lo)] -= 1.0;
            }
        }
        // In-place banded Cholesky.
        for k in 0..m {
            let j0 = k.saturating_sub(band);
            for j in j0..k {
                let mut s = l[k * w + band - (k - j)];
                let i0 = j0.max(j.saturating_sub(band));
                for i in i0..j {
                    s -= l[k * w + band - (k - i)] * l[j * w + band - (j - i)];
                }
                l[k * w + band - (k - j)] = s / l[j * w + band];
            }
            let mut s = l[k * w + band];
            for i in j0..k {
                let v = l[k * w + band - (k - i)];
                s -= v * v;
            }
            if !(s > 0.0) {
                return None;
            }
            l[k * w + band] = s.sqrt();
        }
        Some(Self { n, perm, band, l })
    }

    pub fn bandwidth(&self) -> usize {
        self.band
    }

    /// Estimates the algebraic connectivity (smallest nonzero eigenvalue) by
    /// inverse iteration on the mean-zero subspace.
    pub fn algebraic_connectivity(&self, iterations: usize) -> f64 {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let mut y = vec![0.0; n];
        let mut work = Vec::with_capacity(n);
        let mean = crate::points::tree_sum(&x) / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let mut ratio = 0.0;
        for _ in 0..iterations.max(1) {
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            self.solve(&x, &mut y, &mut work);
            ratio = y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            std::mem::swap(&mut x, &mut y);
        }
        1.0 / ratio
    }

    /// Solves `L x = b` for `b` summing to zero; the result has zero mean.
    pub fn solve(&self, b: &[f64], x: &mut [f64], work: &mut Vec<f64>) {
        let m = self.n - 1;
        let w = self.band + 1;
        let band = self.band;
        work.clear();
        work.extend(self.perm[..m].iter().map(|&v| b[v]));
        for k in 0..m {
            let mut s = work[k];
            for i in k.saturating_sub(band)..k {
                s -= self.l[k * w + band - (k - i)] * work[i];
            }
            work[k] = s / self.l[k * w + band];
        }
        for k in (0..m).rev() {
            let mut s = work[k];
            for i in (k + 1)..m.min(k + band + 1) {
                s -= self.l[i * w + band - (i - k)] * work[i];
            }
            work[k] = s / self.l[k * w + band];
        }
        for (k, &v) in self.perm[..m].iter().enumerate() {
            x[v] = work[k];
        }
        x[self.perm[m]] = 0.0;
        let mean = crate::points::tree_sum(x) / self.n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_apply(n: usize, edges: &[(usize, usize)], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for &(i, j) in edges {
            y[i] += x[i] - x[j];
            y[j] += x[j] - x[i];
        }
        y
    }

    #[test]
    fn solves_random_connected_graph() {
        let n = 60;
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let mut s = 7u64;
        for _ in 0..120 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let i = (s >> 33) as usize % n;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let j = (s >> 33) as usize % n;
            if i != j {
                edges.push((i, j));
            }
        }
        let f = GroundedLaplacian::new(n, &edges).unwrap();
        let mut b: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let mut x = vec![0.0; n];
        f.solve(&b, &mut x, &mut Vec::new());
        let lx = laplacian_apply(n, &edges, &x);
        for (u, v) in lx.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }

    #[test]
    fn path_connectivity_matches_closed_form() {
        let n = 40;
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let lap = GroundedLaplacian::new(n, &edges).unwrap();
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / n as f64).cos();
        assert!((lap.algebraic_connectivity(300) - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn disconnected_graph_has_no_factor() {
        assert!(GroundedLaplacian::new(4, &[(0, 1), (2, 3)]).is_none());
    }

    #[test]
    fn path_graph_has_unit_band() {
        let edges: Vec<(usize, usize)> = (0..9).map(|i| (i, i + 1)).collect();
        assert_eq!(GroundedLaplacian::new(10, &edges).unwrap().bandwidth(), 1);
    }
}
