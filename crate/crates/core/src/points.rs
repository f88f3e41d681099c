//! Dense row-major point sets.

use serde::{Deserialize, Serialize};

use crate::error::{MvuError, Result};

/// `n` points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert_eq!(data.len() % dim, 0, "data length must be a multiple of dim");
        Self { dim, data }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self::new(dim, vec![0.0; n * dim])
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.as_ref().len(), dim, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        dist(self.row(i), self.row(j))
    }

    #[inline]
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        dist2(self.row(i), self.row(j))
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Subtracts the centroid from every row.
    pub fn center(&mut self) {
        let m = self.mean();
        let dim = self.dim;
        for r in self.data.chunks_exact_mut(dim) {
            for (a, b) in r.iter_mut().zip(&m) {
                *a -= b;
            }
        }
    }

    pub fn centered(&self) -> Points {
        let mut c = self.clone();
        c.center();
        c
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Points {
        let mut c = self.clone();
        c.scale(s);
        c
    }

    pub fn translate(&mut self, t: &[f64]) {
        assert_eq!(t.len(), self.dim);
        let dim = self.dim;
        for r in self.data.chunks_exact_mut(dim) {
            for (a, b) in r.iter_mut().zip(t) {
                *a += b;
            }
        }
    }

    /// Applies `x -> Q x` with `Q` a row-major `out_dim x dim` matrix.
    pub fn map_linear(&self, q: &[f64], out_dim: usize) -> Points {
        assert_eq!(q.len(), out_dim * self.dim);
        let mut out = Points::zeros(self.len(), out_dim);
        for i in 0..self.len() {
            let x = self.row(i);
            let y = out.row_mut(i);
            for (a, yi) in y.iter_mut().enumerate() {
                *yi = q[a * self.dim..(a + 1) * self.dim]
                    .iter()
                    .zip(x)
                    .map(|(u, v)| u * v)
                    .sum();
            }
        }
        out
    }

    /// Zero-pads (or truncates) every row to `dim` coordinates.
    pub fn with_dim(&self, dim: usize) -> Points {
        let mut out = Points::zeros(self.len(), dim);
        let k = dim.min(self.dim);
        for i in 0..self.len() {
            out.row_mut(i)[..k].copy_from_slice(&self.row(i)[..k]);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Points) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// CSV with header `x0,...,x{dim-1}` and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 25 + 16);
        let header: Vec<String> = (0..self.dim).map(|a| format!("x{a}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`Points::to_csv`]. Blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Points> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(MvuError::Config {
            line: 1,
            message: "empty point file".into(),
        })?;
        let dim = header.split(',').count();
        let mut data = Vec::new();
        for (k, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != dim {
                return Err(MvuError::Config {
                    line: k + 1,
                    message: format!("expected {dim} fields, found {}", cells.len()),
                });
            }
            for c in cells {
                let v: f64 = c.trim().parse().map_err(|_| MvuError::Config {
                    line: k + 1,
                    message: format!("not a number: `{c}`"),
                })?;
                data.push(v);
            }
        }
        Ok(Points::new(dim, data))
    }
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pairwise tree sum: order is fixed by length alone, so results are
/// reproducible across runs and thread counts.
pub fn tree_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 32 => v.iter().sum(),
        n => {
            let (a, b) = v.split_at(n / 2);
            tree_sum(a) + tree_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centering_zeroes_mean() {
        let mut p = Points::from_rows(&[[1.0, 2.0], [3.0, 6.0], [5.0, 1.0]]);
        p.center();
        assert!(p.mean().iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn map_linear_rotates() {
        let p = Points::from_rows(&[[1.0, 0.0]]);
        let q = p.map_linear(&[0.0, -1.0, 1.0, 0.0], 2);
        assert_eq!(q.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = Points::from_rows(&[[0.1, -2.0 / 3.0], [1e-300, std::f64::consts::PI]]);
        assert_eq!(Points::from_csv(&p.to_csv()).unwrap(), p);
        assert!(Points::from_csv("x0,x1\n1,2\n3\n").is_err());
    }

    #[test]
    fn tree_sum_matches_naive_on_small_ints() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(tree_sum(&v), 499500.0);
    }
}
