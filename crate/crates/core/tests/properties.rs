use proptest::prelude::*;

use mvu_core::analysis::procrustes_align;
use mvu_core::graph::{build_graph_points, graph_geodesics};
use mvu_core::solver::{energy_discrete, energy_double_sum};
use mvu_core::Points;

fn cloud(max_n: usize, dim: usize) -> impl Strategy<Value = Points> {
    (2..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(-5.0f64..5.0, n * dim).prop_map(move |v| Points::new(dim, v))
    })
}

/// Points that are not all equal, so relative comparisons are meaningful.
fn spread(max_n: usize, dim: usize) -> impl Strategy<Value = Points> {
    cloud(max_n, dim).prop_filter("distinct points", |p| energy_discrete(p) > 1e-6)
}

fn rotation_2d(theta: f64, flip: bool) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    let f = if flip { -1.0 } else { 1.0 };
    vec![c, s, -s * f, c * f]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn energy_is_homogeneous_of_degree_two(y in spread(50, 2), l in 0.01f64..100.0) {
        let e = energy_discrete(&y);
        prop_assert!(rel(energy_discrete(&y.scaled(l)), l * l * e) < 1e-12);
    }

    #[test]
    fn energy_ignores_translations(y in spread(50, 3), t in prop::array::uniform3(-10.0f64..10.0)) {
        let mut moved = y.clone();
        moved.translate(&t);
        prop_assert!(rel(energy_discrete(&moved), energy_discrete(&y)) < 1e-12);
    }

    #[test]
    fn variance_form_equals_double_sum(y in spread(50, 2)) {
        prop_assert!(rel(energy_discrete(&y), energy_double_sum(&y)) < 1e-12);
    }

    #[test]
    fn energy_ignores_row_order(y in spread(30, 2), shift in 0usize..30) {
        let n = y.len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| y.row((i + shift) % n).to_vec()).collect();
        prop_assert!(rel(energy_discrete(&Points::from_rows(&rows)), energy_discrete(&y)) < 1e-12);
    }

    #[test]
    fn procrustes_recovers_rigid_motions(
        y in spread(40, 2),
        theta in 0.0f64..std::f64::consts::TAU,
        flip in any::<bool>(),
        t in prop::array::uniform2(-10.0f64..10.0),
    ) {
        let mut b = y.map_linear(&rotation_2d(theta, flip), 2);
        b.translate(&t);
        let al = procrustes_align(&y, &b).unwrap();
        prop_assert!(al.max_residual < 1e-9, "residual {}", al.max_residual);
        // Collinear sets fit both orientations, so the flag is only pinned
        // for full-rank configurations.
        let c = y.centered();
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for r in c.rows() {
            sxx += r[0] * r[0];
            syy += r[1] * r[1];
            sxy += r[0] * r[1];
        }
        if sxx * syy - sxy * sxy > 1e-6 * (sxx + syy).powi(2) {
            prop_assert_eq!(al.reflection, flip);
        }
    }

    #[test]
    fn procrustes_residual_is_invariant_under_motions_of_the_target(
        a in spread(30, 2),
        noise in prop::collection::vec(-0.1f64..0.1, 60),
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let n = a.len();
        let b = Points::new(2, a.as_slice().iter().zip(noise.iter().cycle()).map(|(x, e)| x + e).collect());
        let base = procrustes_align(&a, &b).unwrap().rms_residual;
        let mut moved = b.map_linear(&rotation_2d(theta, false), 2);
        moved.translate(&[3.0, -1.0]);
        let again = procrustes_align(&a, &moved).unwrap().rms_residual;
        prop_assert!((base - again).abs() < 1e-9 * (1.0 + base), "{base} vs {again} (n={n})");
    }

    #[test]
    fn graph_geodesics_form_a_metric(y in cloud(40, 2), r in 1.0f64..4.0) {
        let g = build_graph_points(&y, r).unwrap();
        let n = y.len();
        let d = graph_geodesics(&g);
        for i in 0..n {
            prop_assert_eq!(d[i * n + i], 0.0);
            for j in 0..n {
                prop_assert!(d[i * n + j] == d[j * n + i] || (d[i * n + j] - d[j * n + i]).abs() < 1e-12);
                if d[i * n + j].is_finite() {
                    prop_assert!(d[i * n + j] >= y.dist(i, j) - 1e-12);
                }
                if y.dist(i, j) <= r {
                    prop_assert!(d[i * n + j] <= y.dist(i, j) + 1e-12);
                }
                for k in 0..n {
                    let via = d[i * n + k] + d[k * n + j];
                    prop_assert!(d[i * n + j] <= via + 1e-12);
                }
            }
        }
    }
}
