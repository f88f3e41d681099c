//! Browser bindings. Every export returns a JSON string; failures come back
//! as `{"error": "..."}` so the page never has to catch.

use std::sync::Arc;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use mvu_core::energy::{a_grid, find_a_star, oracle_table};
use mvu_core::graph::{build_graph, radius_schedule};
use mvu_core::manifolds::{make_model, sample, ModelParams, PointCloud};
use mvu_core::solver::{energy_discrete, extract_coordinates, solve, SolverConfig};
use mvu_core::{MvuError, Result};

/// Largest sample the page may request.
pub const MAX_N: usize = 600;

/// Presets offered by the page: catalog name plus parameters.
const PRESETS: &[(&str, &str, &[(&str, &str)])] = &[
    ("interval", "interval", &[]),
    ("disk", "disk", &[]),
    ("arc", "arc", &[("length", "3.0")]),
    ("circle", "circle", &[]),
    ("arc-tube", "tube", &[("base", "arc"), ("length", "3.14159"), ("sigma", "0.1")]),
    ("ellipse-tube", "tube", &[("base", "ellipse"), ("a", "1.4"), ("sigma", "0.1")]),
];

fn cloud(preset: &str, n: usize, seed: u64) -> Result<PointCloud> {
    let (_, name, params) = PRESETS
        .iter()
        .find(|(p, _, _)| *p == preset)
        .ok_or_else(|| MvuError::InvalidParameter(format!("unknown preset `{preset}`")))?;
    if !(3..=MAX_N).contains(&n) {
        return Err(MvuError::InvalidParameter(format!("n must lie in [3, {MAX_N}]")));
    }
    let params: ModelParams = params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    sample(&Arc::new(make_model(name, &params)?), n, seed)
}

fn flat(points: &mvu_core::Points) -> Vec<f64> {
    points.as_slice().to_vec()
}

fn respond(body: Result<Value>) -> String {
    match body {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn graph_body(preset: &str, n: usize, seed: u64, c: f64) -> Result<Value> {
    let cl = cloud(preset, n, seed)?;
    let r = radius_schedule(n, cl.model.intrinsic_dim, c)?;
    let g = build_graph(&cl, r)?;
    let edges: Vec<[usize; 2]> = g.edges.iter().map(|e| [e.i, e.j]).collect();
    Ok(json!({
        "model": cl.model.name,
        "r": r,
        "components": g.components,
        "points": flat(&cl.points),
        "edges": edges,
    }))
}

fn unfold_body(preset: &str, n: usize, seed: u64, c: f64) -> Result<Value> {
    let cl = cloud(preset, n, seed)?;
    let r = radius_schedule(n, cl.model.intrinsic_dim, c)?;
    let g = build_graph(&cl, r)?;
    g.require_connected()?;
    let cfg = SolverConfig {
        restarts: 0,
        seed,
        ..SolverConfig::default()
    };
    let (emb, trace) = solve(&cl, &g, &cfg)?;
    // A perfectly unrolled curve has rank one; plot it on the x-axis.
    let coords = match extract_coordinates(&emb, 2) {
        Err(MvuError::RankDeficient { rank, .. }) if rank >= 1 => extract_coordinates(&emb, rank)?,
        other => other?,
    };
    let edges: Vec<[usize; 2]> = g.edges.iter().map(|e| [e.i, e.j]).collect();
    Ok(json!({
        "model": cl.model.name,
        "r": r,
        "points": flat(&cl.points),
        "embedding": flat(&coords.coords.with_dim(2)),
        "edges": edges,
        "energy": emb.energy,
        "identity_energy": energy_discrete(&cl.points),
        "max_violation_over_r": emb.max_violation / r,
        "trace_fraction": coords.trace_fraction,
        "converged": trace.converged,
    }))
}

fn curve_body(start: f64, stop: f64, step: f64) -> Result<Value> {
    let rows = oracle_table(&a_grid(start, stop, step)?)?;
    let star = find_a_star()?;
    Ok(json!({
        "a": rows.iter().map(|r| r.a).collect::<Vec<_>>(),
        "b": rows.iter().map(|r| r.b).collect::<Vec<_>>(),
        "f": rows.iter().map(|r| r.f).collect::<Vec<_>>(),
        "two_pi": 2.0 * std::f64::consts::PI,
        "a_star": star.a_star,
    }))
}

/// Preset names, as a JSON array.
#[wasm_bindgen]
pub fn presets() -> String {
    json!(PRESETS.iter().map(|(p, _, _)| *p).collect::<Vec<_>>()).to_string()
}

/// Sample of a preset and its neighborhood graph at radius `c * r(n)`.
#[wasm_bindgen]
pub fn neighborhood_graph(preset: &str, n: usize, seed: u32, c: f64) -> String {
    respond(graph_body(preset, n, seed.into(), c))
}

/// Solves the unfolding problem and returns its top two principal coordinates.
#[wasm_bindgen]
pub fn unfold(preset: &str, n: usize, seed: u32, c: f64) -> String {
    respond(unfold_body(preset, n, seed.into(), c))
}

/// Ellipse functional `F(a)` over `start:stop:step`, with the threshold `a*`.
#[wasm_bindgen]
pub fn ellipse_curve(start: f64, stop: f64, step: f64) -> String {
    respond(curve_body(start, stop, step))
}
