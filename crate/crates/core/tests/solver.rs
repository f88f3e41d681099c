use std::sync::Arc;

use mvu_core::analysis::solution_distance;
use mvu_core::graph::{build_graph, radius_schedule};
use mvu_core::manifolds::{sample, ManifoldModel, PointCloud};
use mvu_core::solver::{
    canonicalize, energy_discrete, extract_coordinates, feasibility_report, solve, Backend, Init, SolverConfig,
};
use mvu_core::{MvuError, Points};

fn cloud(model: ManifoldModel, n: usize, seed: u64) -> PointCloud {
    sample(&Arc::new(model), n, seed).unwrap()
}

fn fixed(model: ManifoldModel, rows: &[[f64; 2]]) -> PointCloud {
    PointCloud::from_points(Points::from_rows(rows), Arc::new(model), 0)
}

#[test]
fn bent_path_unfolds_to_a_segment() {
    // Unit edges 0-1 and 1-2 only; the optimum is the straight segment
    // 0, 1, 2 with energy 2 * (1 + 4 + 1) / (3 * 2).
    let c = fixed(ManifoldModel::rectangle(1.0, 1.0).unwrap(), &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
    let g = build_graph(&c, 1.0).unwrap();
    assert_eq!(g.diagnostics().edges, 2);
    let (emb, _) = solve(&c, &g, &SolverConfig::default()).unwrap();
    let expected = 12.0 / 6.0;
    assert!((emb.energy - expected).abs() < 1e-4 * expected, "energy {}", emb.energy);
    assert!((emb.y.dist(0, 2) - 2.0).abs() < 1e-3);
}

#[test]
fn star_spreads_its_leaves() {
    // Center plus three leaves at distance 0.9 whose pairwise distances
    // exceed r = 1. At the optimum the leaves sum to zero around the center,
    // giving sum_{i<j} |y_i - y_j|^2 = 3 * 0.81 + 9 * 0.81 over 4 * 3 / 2 pairs.
    let leaf = |deg: f64| {
        let t = deg.to_radians();
        [0.9 * t.cos(), 0.9 * t.sin()]
    };
    let c = fixed(ManifoldModel::disk(1.0).unwrap(), &[[0.0, 0.0], leaf(0.0), leaf(100.0), leaf(200.0)]);
    let g = build_graph(&c, 1.0).unwrap();
    assert_eq!(g.diagnostics().edges, 3);
    let (emb, _) = solve(&c, &g, &SolverConfig::default()).unwrap();
    let expected = 2.0 * 12.0 * 0.81 / 12.0;
    assert!((emb.energy - expected).abs() < 1e-4 * expected, "energy {} vs {expected}", emb.energy);
}

#[test]
fn solutions_are_feasible_and_beat_the_identity() {
    for (model, n, r) in [
        (ManifoldModel::interval(1.0).unwrap(), 120, 0.1),
        (ManifoldModel::disk(1.0).unwrap(), 200, 0.3),
        (ManifoldModel::circle(1.0).unwrap(), 150, 0.5),
    ] {
        let c = cloud(model, n, 5);
        let g = build_graph(&c, r).unwrap();
        g.require_connected().unwrap();
        let cfg = SolverConfig::default();
        let (emb, trace) = solve(&c, &g, &cfg).unwrap();
        let feas = feasibility_report(&c, &g, &emb.y);
        assert!(feas.max_violation <= cfg.feas_tol * r, "{}: violation {}", c.model.name, feas.max_violation);
        assert!((emb.max_violation - feas.max_violation).abs() < 1e-12);
        let identity = energy_discrete(&c.points);
        assert!(emb.energy >= identity * (1.0 - 1e-9), "{}: {} < {identity}", c.model.name, emb.energy);
        assert!((emb.energy - energy_discrete(&emb.y)).abs() < 1e-12);
        assert!(!trace.records.is_empty());
        let mean = emb.y.mean();
        assert!(mean.iter().all(|m| m.abs() < 1e-12));
    }
}

#[test]
fn interval_solution_is_the_sample_itself() {
    let c = cloud(ManifoldModel::interval(1.0).unwrap(), 200, 2);
    let g = build_graph(&c, radius_schedule(200, 1, 2.0).unwrap()).unwrap();
    let (emb, _) = solve(&c, &g, &SolverConfig::default()).unwrap();
    assert!(solution_distance(&emb, &c).unwrap() < 1e-6);
    let coords = extract_coordinates(&emb, 1).unwrap();
    assert!(coords.trace_fraction > 1.0 - 1e-9);
}

#[test]
fn solves_are_deterministic() {
    let c = cloud(ManifoldModel::disk(1.0).unwrap(), 150, 8);
    let g = build_graph(&c, radius_schedule(150, 2, 2.0).unwrap()).unwrap();
    let cfg = SolverConfig {
        seed: 17,
        ..SolverConfig::default()
    };
    let (a, _) = solve(&c, &g, &cfg).unwrap();
    let (b, _) = solve(&c, &g, &cfg).unwrap();
    assert_eq!(a.y, b.y);
    assert_eq!(a.energy.to_bits(), b.energy.to_bits());
}

#[test]
fn backends_agree() {
    let c = cloud(ManifoldModel::circle(1.0).unwrap(), 120, 3);
    let g = build_graph(&c, 0.5).unwrap();
    let coord = solve(&c, &g, &SolverConfig::default()).unwrap().0;
    let gram = solve(
        &c,
        &g,
        &SolverConfig {
            backend: Backend::GramLowRank,
            ..SolverConfig::default()
        },
    )
    .unwrap()
    .0;
    let rel = (coord.energy - gram.energy).abs() / coord.energy;
    assert!(rel < 0.01, "coordinate {} gram {}", coord.energy, gram.energy);
}

#[test]
fn random_starts_reach_a_feasible_point() {
    let c = cloud(ManifoldModel::interval(1.0).unwrap(), 80, 4);
    let r = radius_schedule(80, 1, 2.0).unwrap();
    let g = build_graph(&c, r).unwrap();
    let cfg = SolverConfig {
        init: Init::Random,
        restarts: 0,
        ..SolverConfig::default()
    };
    let (emb, _) = solve(&c, &g, &cfg).unwrap();
    assert!(emb.max_violation <= cfg.feas_tol * r);
    assert!(emb.energy > 0.0);
}

#[test]
fn rank_cap_limits_the_embedding_width() {
    let c = cloud(ManifoldModel::disk(1.0).unwrap(), 100, 6);
    let g = build_graph(&c, radius_schedule(100, 2, 2.0).unwrap()).unwrap();
    let cfg = SolverConfig {
        backend: Backend::GramLowRank,
        rank_cap: Some(3),
        ..SolverConfig::default()
    };
    let (emb, _) = solve(&c, &g, &cfg).unwrap();
    assert!(emb.y.dim() <= 3);
}

#[test]
fn disconnected_graphs_are_reported() {
    let c = fixed(ManifoldModel::interval(1.0).unwrap(), &[[0.0, 0.0], [0.1, 0.0], [0.9, 0.0], [1.0, 0.0]]);
    let g = build_graph(&c, 0.2).unwrap();
    assert!(matches!(g.require_connected(), Err(MvuError::DisconnectedGraph { components: 2 })));
    assert!(solve(&c, &g, &SolverConfig::default()).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SolverConfig {
            feas_tol: 0.0,
            ..SolverConfig::default()
        },
        SolverConfig {
            relaxation: 2.0,
            ..SolverConfig::default()
        },
        SolverConfig {
            penalty_growth: 1.0,
            ..SolverConfig::default()
        },
        SolverConfig {
            rank_cap: Some(0),
            ..SolverConfig::default()
        },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err());
    }
    assert!("lbfgs".parse::<Backend>().is_err());
}

#[test]
fn canonical_form_is_centered_and_sign_fixed() {
    let y = Points::from_rows(&[[1.0, 5.0], [3.0, 5.0], [2.0, 8.0]]);
    let a = canonicalize(&y);
    let b = canonicalize(&y.scaled(-1.0));
    assert!(a.mean().iter().all(|m| m.abs() < 1e-12));
    assert!(a.max_abs_diff(&b) < 1e-12);
    assert!((energy_discrete(&a) - energy_discrete(&y)).abs() < 1e-12);
}
