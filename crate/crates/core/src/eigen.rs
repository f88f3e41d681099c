//! Self-contained symmetric eigensolvers: cyclic Jacobi for small dense
//! matrices, Lanczos with full reorthogonalization for large implicit ones,
//! and a one-sided Jacobi SVD for tiny cross-covariance matrices.

/// Eigenpairs sorted by decreasing eigenvalue. `vectors[k]` is the unit
/// eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi on a symmetric row-major `n x n` matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> SymEigen {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    SymEigen {
        values: order.iter().map(|&i| m[i * n + i]).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
            .collect(),
    }
}

/// Leading eigenpairs of an implicit symmetric PSD operator of size `n`,
/// via Lanczos with full reorthogonalization. `steps` bounds the Krylov
/// dimension; iteration stops early on invariant-subspace breakdown.
pub fn lanczos_top<F>(apply: F, n: usize, k: usize, steps: usize, seed: u64) -> SymEigen
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = steps.min(n).max(k.min(n));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);

    // Deterministic pseudo-random start vector.
    let mut state = seed ^ 0x9E37_79B9_7F4A_7C15;
    let mut q: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    normalize(&mut q);
    let mut w = vec![0.0; n];
    let mut op_norm: f64 = 0.0;
    for j in 0..m {
        apply(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        basis.push(q.clone());
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        op_norm = op_norm.max(a.abs()).max(bnorm);
        if j + 1 == m || bnorm <= 1e-12 * op_norm.max(1e-300) {
            break;
        }
        beta.push(bnorm);
        q = w.iter().map(|x| x / bnorm).collect();
    }
    let dim = alpha.len();
    let mut t = vec![0.0; dim * dim];
    for i in 0..dim {
        t[i * dim + i] = alpha[i];
        if i + 1 < dim {
            t[i * dim + i + 1] = beta[i];
            t[(i + 1) * dim + i] = beta[i];
        }
    }
    let small = jacobi_eigen(&t, dim);
    let take = k.min(dim);
    let vectors = small.vectors[..take]
        .iter()
        .map(|s| {
            let mut v = vec![0.0; n];
            for (coef, b) in s.iter().zip(&basis) {
                axpy(*coef, b, &mut v);
            }
            normalize(&mut v);
            v
        })
        .collect();
    SymEigen {
        values: small.values[..take].to_vec(),
        vectors,
    }
}

/// Thin SVD `h = U diag(s) V^T` of a row-major `rows x cols` matrix
/// (`rows >= cols`) by one-sided Jacobi. Singular values are sorted in
/// decreasing order; `u` and `v` are row-major with the singular vectors as
/// columns. Columns of `u` for zero singular values are completed to an
/// orthonormal set.
pub struct Svd {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

pub fn svd_jacobi(h: &[f64], rows: usize, cols: usize) -> Svd {
    assert!(rows >= cols);
    let mut a = h.to_vec();
    let mut v = vec![0.0; cols * cols];
    for i in 0..cols {
        v[i * cols + i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..rows {
                    let x = a[r * cols + p];
                    let y = a[r * cols + q];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let x = a[r * cols + p];
                    let y = a[r * cols + q];
                    a[r * cols + p] = c * x - s * y;
                    a[r * cols + q] = s * x + c * y;
                }
                for r in 0..cols {
                    let x = v[r * cols + p];
                    let y = v[r * cols + q];
                    v[r * cols + p] = c * x - s * y;
                    v[r * cols + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols)
        .map(|c| (0..rows).map(|r| a[r * cols + c].powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let mut u = vec![0.0; rows * cols];
    let mut vs = vec![0.0; cols * cols];
    let mut s = vec![0.0; cols];
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for (k, &c) in order.iter().enumerate() {
        s[k] = norms[c];
        for r in 0..cols {
            vs[r * cols + k] = v[r * cols + c];
        }
        let mut col: Vec<f64> = if norms[c] > 1e-14 * smax.max(1e-300) {
            (0..rows).map(|r| a[r * cols + c] / norms[c]).collect()
        } else {
            complete_basis(&ucols, rows)
        };
        for prev in &ucols {
            let d = dot(prev, &col);
            axpy(-d, prev, &mut col);
        }
        normalize(&mut col);
        ucols.push(col);
    }
    for (k, col) in ucols.iter().enumerate() {
        for r in 0..rows {
            u[r * cols + k] = col[r];
        }
    }
    Svd {
        u,
        s,
        v: vs,
        rows,
        cols,
    }
}

fn complete_basis(existing: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut best = vec![0.0; n];
    let mut best_norm = -1.0;
    for e in 0..n {
        let mut c = vec![0.0; n];
        c[e] = 1.0;
        for prev in existing {
            let d = dot(prev, &c);
            axpy(-d, prev, &mut c);
        }
        let nn = dot(&c, &c);
        if nn > best_norm {
            best_norm = nn;
            best = c;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Determinant of a small square row-major matrix (d <= 3).
pub fn det_small(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            // Gaussian elimination with partial pivoting.
            let mut a = m.to_vec();
            let mut det = 1.0;
            for c in 0..d {
                let piv = (c..d)
                    .max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs()))
                    .unwrap();
                if a[piv * d + c] == 0.0 {
                    return 0.0;
                }
                if piv != c {
                    for k in 0..d {
                        a.swap(piv * d + k, c * d + k);
                    }
                    det = -det;
                }
                det *= a[c * d + c];
                for r in (c + 1)..d {
                    let f = a[r * d + c] / a[c * d + c];
                    for k in c..d {
                        a[r * d + k] -= f * a[c * d + k];
                    }
                }
            }
            det
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5
        };
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = next();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn jacobi_reconstructs() {
        let n = 7;
        let a = sym(n, 3);
        let e = jacobi_eigen(&a, n);
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum();
                assert!((r - a[i * n + j]).abs() < 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn lanczos_matches_jacobi_on_low_rank_gram() {
        // Gram of 40 points in R^3.
        let n = 40;
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.cos() * 2.0, t.sin(), (0.3 * t).sin() * 0.5]
            })
            .collect();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = (0..3).map(|k| pts[i][k] * pts[j][k]).sum();
            }
        }
        let dense = jacobi_eigen(&g, n);
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = (0..n).map(|j| g[i * n + j] * x[j]).sum();
            }
        };
        let lz = lanczos_top(apply, n, 3, 20, 1);
        for k in 0..3 {
            assert!((dense.values[k] - lz.values[k]).abs() < 1e-9 * dense.values[0]);
        }
    }

    #[test]
    fn svd_of_rank_deficient_matrix_is_orthonormal() {
        let h = [1.0, 2.0, 2.0, 4.0];
        let s = svd_jacobi(&h, 2, 2);
        assert!((s.s[0] - 5.0).abs() < 1e-12);
        assert!(s.s[1].abs() < 1e-12);
        let u = &s.u;
        let d = u[0] * u[1] + u[2] * u[3];
        assert!(d.abs() < 1e-12);
        for r in 0..2 {
            for c in 0..2 {
                let rec: f64 = (0..2).map(|k| s.u[r * 2 + k] * s.s[k] * s.v[c * 2 + k]).sum();
                assert!((rec - h[r * 2 + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn det_small_agrees_with_elimination() {
        let m = [2.0, 1.0, 0.5, -1.0, 3.0, 1.0, 0.0, 2.0, 4.0];
        let d3 = det_small(&m, 3);
        let m4 = [
            2.0, 1.0, 0.5, 0.0, -1.0, 3.0, 1.0, 0.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ];
        assert!((det_small(&m4, 4) - d3).abs() < 1e-12);
    }
}
