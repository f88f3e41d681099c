//! Edge-splitting augmented Lagrangian.
//!
//! Every edge difference gets a copy `d_e = z_i - z_j` constrained to the
//! ball `|d_e| <= l_e`. With scaled multipliers `u_e` the augmented
//! Lagrangian is
//!
//! `L(z, d, u) = -w/2 |C z|^2 + rho/2 sum_e |z_i - z_j - d_e + u_e|^2 - rho/2 |u|^2`
//!
//! where `C` removes the mean. One sweep minimizes over `z` with the concave
//! objective linearized at the current iterate (a Laplacian solve), projects
//! each edge copy onto its ball, and takes a multiplier step.

use super::banded::GroundedLaplacian;
use crate::points::tree_sum;

/// Smooth part of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `-w/2 sum_i |z_i - mean(z)|^2`.
    Variance,
    /// `-w/2 sum_i |z_i|^2` on factors whose rows sum to zero.
    TraceCentered,
}

#[derive(Debug, Clone)]
pub struct EdgeSplitting {
    pub n: usize,
    pub dim: usize,
    /// `(i, j, l_e)` in normalized units.
    pub edges: Vec<(usize, usize, f64)>,
    pub weight: f64,
    pub objective: Objective,
}

#[derive(Debug, Clone)]
pub struct SplitState {
    /// Row-major `n x dim`.
    pub z: Vec<f64>,
    /// Row-major `m x dim` edge copies.
    pub d: Vec<f64>,
    /// Scaled multipliers, same layout as `d`.
    pub u: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    /// `max_e |z_i - z_j - d_e|` after the last sweep.
    pub primal_max: f64,
    /// `|B z - d|_2`.
    pub primal: f64,
    /// `rho |B^T (d - d_prev)|_2` of the last sweep.
    pub dual: f64,
}

impl EdgeSplitting {
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    fn objective_gradient(&self, z: &[f64], out: &mut [f64]) {
        let k = self.dim;
        let n = self.n;
        let mean: Vec<f64> = (0..k)
            .map(|a| {
                let col: Vec<f64> = (0..n).map(|i| z[i * k + a]).collect();
                tree_sum(&col) / n as f64
            })
            .collect();
        for i in 0..n {
            for a in 0..k {
                // For the trace objective the raw gradient is `-w z`; its
                // projection onto the centering constraint's tangent space
                // coincides with the variance gradient.
                out[i * k + a] = -self.weight * (z[i * k + a] - mean[a]);
            }
        }
    }

    /// Value of the augmented Lagrangian and its gradient with respect to `z`.
    pub fn augmented_lagrangian(&self, st: &SplitState, grad: &mut [f64]) -> f64 {
        let k = self.dim;
        let n = self.n;
        let z = &st.z;
        let base = match self.objective {
            Objective::Variance => {
                self.objective_gradient(z, grad);
                let terms: Vec<f64> = (0..n * k).map(|p| grad[p] * grad[p]).collect();
                -0.5 * tree_sum(&terms) / self.weight
            }
            Objective::TraceCentered => {
                let mut terms = Vec::with_capacity(n * k);
                for p in 0..n * k {
                    grad[p] = -self.weight * z[p];
                    terms.push(z[p] * z[p]);
                }
                -0.5 * self.weight * tree_sum(&terms)
            }
        };
        let mut terms = Vec::with_capacity(self.m());
        for (e, &(i, j, _)) in self.edges.iter().enumerate() {
            let mut s = 0.0;
            for a in 0..k {
                let q = z[i * k + a] - z[j * k + a] - st.d[e * k + a] + st.u[e * k + a];
                s += q * q - st.u[e * k + a] * st.u[e * k + a];
                grad[i * k + a] += st.rho * q;
                grad[j * k + a] -= st.rho * q;
            }
            terms.push(s);
        }
        base + 0.5 * st.rho * tree_sum(&terms)
    }

    /// Feasible start for a given `z`: edge copies projected onto their balls
    /// and zero multipliers.
    pub fn start(&self, z: Vec<f64>, rho: f64) -> SplitState {
        let k = self.dim;
        let mut d = vec![0.0; self.m() * k];
        for (e, &(i, j, l)) in self.edges.iter().enumerate() {
            let mut s = 0.0;
            for a in 0..k {
                let q = z[i * k + a] - z[j * k + a];
                d[e * k + a] = q;
                s += q * q;
            }
            let norm = s.sqrt();
            if norm > l {
                d[e * k..(e + 1) * k].iter_mut().for_each(|v| *v *= l / norm);
            }
        }
        SplitState {
            z,
            u: vec![0.0; d.len()],
            d,
            rho,
        }
    }

    /// Runs `sweeps` iterations with over-relaxation `alpha` in `[1, 2)`.
    pub fn sweep(
        &self,
        lap: &GroundedLaplacian,
        st: &mut SplitState,
        sweeps: usize,
        alpha: f64,
    ) -> SweepStats {
        let k = self.dim;
        let n = self.n;
        let mut grad = vec![0.0; n * k];
        let mut rhs = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut work = Vec::with_capacity(n);
        let mut d_prev = st.d.clone();
        let mut stats = SweepStats {
            primal_max: 0.0,
            primal: 0.0,
            dual: 0.0,
        };
        for _ in 0..sweeps {
            self.objective_gradient(&st.z, &mut grad);
            d_prev.copy_from_slice(&st.d);
            for a in 0..k {
                for i in 0..n {
                    rhs[i] = -grad[i * k + a] / st.rho;
                }
                for (e, &(i, j, _)) in self.edges.iter().enumerate() {
                    let v = st.d[e * k + a] - st.u[e * k + a];
                    rhs[i] += v;
                    rhs[j] -= v;
                }
                lap.solve(&rhs, &mut col, &mut work);
                for i in 0..n {
                    st.z[i * k + a] = col[i];
                }
            }
            let mut worst: f64 = 0.0;
            let mut primal2 = Vec::with_capacity(self.m());
            let mut q = [0.0f64; 16];
            for (e, &(i, j, l)) in self.edges.iter().enumerate() {
                let mut s = 0.0;
                let mut r2: f64 = 0.0;
                for a in 0..k {
                    let bz = st.z[i * k + a] - st.z[j * k + a];
                    let r = bz - st.d[e * k + a];
                    r2 += r * r;
                    let v = alpha * bz + (1.0 - alpha) * st.d[e * k + a] + st.u[e * k + a];
                    if k <= 16 {
                        q[a] = v;
                    }
                    s += v * v;
                }
                worst = worst.max(r2.sqrt());
                primal2.push(r2);
                let norm = s.sqrt();
                let shrink = if norm > l { l / norm } else { 1.0 };
                for a in 0..k {
                    let v = if k <= 16 {
                        q[a]
                    } else {
                        let bz = st.z[i * k + a] - st.z[j * k + a];
                        alpha * bz + (1.0 - alpha) * st.d[e * k + a] + st.u[e * k + a]
                    };
                    let dn = v * shrink;
                    st.d[e * k + a] = dn;
                    st.u[e * k + a] = v - dn;
                }
            }
            stats.primal_max = worst;
            stats.primal = tree_sum(&primal2).sqrt();
        }
        // Dual residual of the final sweep: rho |B^T (d - d_prev)|.
        let mut bt = vec![0.0; n * k];
        for (e, &(i, j, _)) in self.edges.iter().enumerate() {
            for a in 0..k {
                let v = st.d[e * k + a] - d_prev[e * k + a];
                bt[i * k + a] += v;
                bt[j * k + a] -= v;
            }
        }
        let terms: Vec<f64> = bt.iter().map(|v| v * v).collect();
        stats.dual = st.rho * tree_sum(&terms).sqrt();
        stats
    }

    /// Rescales the penalty by `factor`, keeping the unscaled multipliers.
    pub fn rescale_penalty(st: &mut SplitState, factor: f64) {
        st.rho *= factor;
        st.u.iter_mut().for_each(|v| *v /= factor);
    }
}
