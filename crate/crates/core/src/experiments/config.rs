//! Flat `key = value` experiment configs.
//!
//! ```text
//! version = 1
//! kind = convex_consistency
//! model = interval
//! model.length = 1
//! n = 50, 100, 200
//! seeds = 1, 2, 3
//! r = auto
//! r.constant = 1
//! ```
//!
//! `#` starts a comment. Float grids accept `start:stop:step`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{MvuError, Result};
use crate::manifolds::ModelParams;
use crate::solver::{Backend, Init, SolverConfig};

/// Overrides `output` when set.
pub const OUTPUT_ENV: &str = "MVU_OUTPUT_DIR";
pub const CONFIG_VERSION: u32 = 1;
/// Desk-scale cap on solver sample sizes.
pub const MAX_SOLVER_N: usize = 2000;
/// Desk-scale cap on tail-experiment trials.
pub const MAX_TRIALS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ConvexConsistency,
    RateSweep,
    NoiseSweep,
    NonConvexTube,
    EllipseHole,
    UStatTail,
    OracleTable,
    /// Closed-curve probe (circle model), reported without checks.
    SphereCircle,
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "convex_consistency" => Self::ConvexConsistency,
            "rate_sweep" => Self::RateSweep,
            "noise_sweep" => Self::NoiseSweep,
            "nonconvex_tube" => Self::NonConvexTube,
            "ellipse_hole" => Self::EllipseHole,
            "ustat_tail" => Self::UStatTail,
            "oracle_table" => Self::OracleTable,
            "sphere_circle" => Self::SphereCircle,
            _ => return Err(format!("unknown experiment kind `{s}`")),
        })
    }
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ConvexConsistency => "convex_consistency",
            Self::RateSweep => "rate_sweep",
            Self::NoiseSweep => "noise_sweep",
            Self::NonConvexTube => "nonconvex_tube",
            Self::EllipseHole => "ellipse_hole",
            Self::UStatTail => "ustat_tail",
            Self::OracleTable => "oracle_table",
            Self::SphereCircle => "sphere_circle",
        }
    }

    /// Kinds whose runs are tubes of the configured base model.
    pub fn uses_sigma(self) -> bool {
        matches!(self, Self::NoiseSweep | Self::NonConvexTube | Self::EllipseHole)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadiusRule {
    Explicit(f64),
    /// `radius_schedule(n, d, c)` with `d` the intrinsic dimension.
    Schedule { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    /// Final median energy gap, relative to the continuum value.
    pub gap_rel: f64,
    /// Final median Procrustes residual.
    pub residual: f64,
    /// Identity-recovery residual that counts as non-recovery.
    pub residual_floor: f64,
    /// Upper limit of the log-log slope of the gap against `n`.
    pub max_slope: f64,
    /// Relative tolerance of the small-sigma energy against the noiseless one.
    pub noise_rel: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            gap_rel: 0.05,
            residual: 0.05,
            residual_floor: 0.1,
            max_slope: -0.2,
            noise_rel: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSettings {
    pub n: usize,
    pub trials: usize,
    pub t_grid: Vec<f64>,
}

impl Default for TailSettings {
    fn default() -> Self {
        Self {
            n: 100,
            trials: 2000,
            t_grid: (0..10).map(|k| 0.02 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: ExperimentKind,
    pub model: String,
    /// Numeric values are normalized so `1` and `1.0` hash alike.
    pub model_params: ModelParams,
    pub n_grid: Vec<usize>,
    pub radius: RadiusRule,
    pub sigma_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub solver: SolverConfig,
    pub thresholds: Thresholds,
    pub tail: TailSettings,
    /// `(start, stop, step)` of the oracle table.
    pub a_grid: (f64, f64, f64),
    /// Draws behind Monte Carlo continuum energies.
    pub mc_draws: usize,
    /// Not part of the hash.
    #[serde(skip)]
    pub output: PathBuf,
    /// Worker threads for independent cells; 0 means all cores. Not hashed.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    // The oracle grid stops at 1.5707, just short of pi/2, on purpose.
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            kind: ExperimentKind::ConvexConsistency,
            model: "interval".into(),
            model_params: ModelParams::new(),
            n_grid: vec![100],
            radius: RadiusRule::Schedule { c: 1.0 },
            sigma_grid: Vec::new(),
            seeds: vec![1],
            solver: SolverConfig::default(),
            thresholds: Thresholds::default(),
            tail: TailSettings::default(),
            a_grid: (1.0, 1.5707, 0.01),
            mc_draws: 20_000,
            output: PathBuf::from("out"),
            workers: 0,
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> MvuError {
    MvuError::Config {
        line,
        message: message.into(),
    }
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| err(line, format!("field `{key}`: cannot parse `{v}`")))
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(line, key, s))
        .collect()
}

/// Comma list or inclusive `start:stop:step` grid.
fn float_grid(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    if v.contains(':') {
        let (a, b, c) = triple(line, key, v)?;
        crate::energy::a_grid(a, b, c).map_err(|e| err(line, format!("field `{key}`: {e}")))
    } else {
        list(line, key, v)
    }
}

fn triple(line: usize, key: &str, v: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = v
        .split(':')
        .map(|s| num(line, key, s))
        .collect::<Result<_>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(err(line, format!("field `{key}`: expected start:stop:step"))),
    }
}

fn normalize_param(v: &str) -> String {
    match v.trim().parse::<f64>() {
        Ok(x) => format!("{x:?}"),
        Err(_) => v.trim().to_string(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut version_line = None;
        let mut kind_set = false;
        let mut radius_auto = true;
        let mut radius_c = 1.0;
        let mut radius_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            let value = value.trim();
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(err(line, format!("field `{key}` already set on line {prev}")));
            }
            if let Some(p) = key.strip_prefix("model.") {
                cfg.model_params.insert(p.to_string(), normalize_param(value));
                continue;
            }
            match key {
                "version" => {
                    let v: u32 = num(line, key, value)?;
                    if v != CONFIG_VERSION {
                        return Err(err(line, format!("unsupported version {v} (expected {CONFIG_VERSION})")));
                    }
                    cfg.version = v;
                    version_line = Some(line);
                }
                "kind" => {
                    cfg.kind = value.parse().map_err(|e: String| err(line, e))?;
                    kind_set = true;
                }
                "model" => cfg.model = value.to_string(),
                "n" => {
                    cfg.n_grid = list(line, key, value)?;
                    if cfg.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(err(line, "field `n`: grid must be strictly increasing"));
                    }
                    if let Some(&n) = cfg.n_grid.iter().find(|&&n| !(2..=MAX_SOLVER_N).contains(&n)) {
                        return Err(err(line, format!("field `n`: {n} outside [2, {MAX_SOLVER_N}]")));
                    }
                }
                "r" => {
                    radius_line = line;
                    if value == "auto" {
                        radius_auto = true;
                    } else {
                        radius_auto = false;
                        let r: f64 = num(line, key, value)?;
                        if !(r > 0.0 && r.is_finite()) {
                            return Err(err(line, "field `r` must be positive"));
                        }
                        cfg.radius = RadiusRule::Explicit(r);
                    }
                }
                "r.constant" => {
                    radius_c = num(line, key, value)?;
                    if !(radius_c > 0.0 && f64::is_finite(radius_c)) {
                        return Err(err(line, "field `r.constant` must be positive"));
                    }
                }
                "sigma" => {
                    cfg.sigma_grid = float_grid(line, key, value)?;
                    if cfg.sigma_grid.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                        return Err(err(line, "field `sigma`: values must be non-negative"));
                    }
                    if cfg.sigma_grid.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(err(line, "field `sigma`: grid must be strictly increasing"));
                    }
                }
                "seeds" => cfg.seeds = list(line, key, value)?,
                "output" => cfg.output = PathBuf::from(value),
                "workers" => cfg.workers = num(line, key, value)?,
                "mc_draws" => cfg.mc_draws = num(line, key, value)?,
                "a_grid" => cfg.a_grid = triple(line, key, value)?,
                "tail.n" => cfg.tail.n = num(line, key, value)?,
                "tail.trials" => {
                    cfg.tail.trials = num(line, key, value)?;
                    if !(1000..=MAX_TRIALS).contains(&cfg.tail.trials) {
                        return Err(err(line, format!("field `tail.trials` must lie in [1000, {MAX_TRIALS}]")));
                    }
                }
                "tail.t" => cfg.tail.t_grid = float_grid(line, key, value)?,
                "threshold.gap_rel" => cfg.thresholds.gap_rel = num(line, key, value)?,
                "threshold.residual" => cfg.thresholds.residual = num(line, key, value)?,
                "threshold.residual_floor" => cfg.thresholds.residual_floor = num(line, key, value)?,
                "threshold.max_slope" => cfg.thresholds.max_slope = num(line, key, value)?,
                "threshold.noise_rel" => cfg.thresholds.noise_rel = num(line, key, value)?,
                "solver.backend" => cfg.solver.backend = value.parse::<Backend>().map_err(|e| err(line, e.to_string()))?,
                "solver.init" => {
                    cfg.solver.init = match value {
                        "identity" => Init::Identity,
                        "random" => Init::Random,
                        _ => return Err(err(line, format!("field `solver.init`: unknown `{value}`"))),
                    }
                }
                "solver.feas_tol" => cfg.solver.feas_tol = num(line, key, value)?,
                "solver.relaxation" => cfg.solver.relaxation = num(line, key, value)?,
                "solver.initial_penalty" => cfg.solver.initial_penalty = num(line, key, value)?,
                "solver.penalty_growth" => cfg.solver.penalty_growth = num(line, key, value)?,
                "solver.max_outer" => cfg.solver.max_outer = num(line, key, value)?,
                "solver.max_inner" => cfg.solver.max_inner = num(line, key, value)?,
                "solver.rank_cap" => cfg.solver.rank_cap = Some(num(line, key, value)?),
                "solver.stop_tol" => cfg.solver.stop_tol = num(line, key, value)?,
                "solver.restarts" => cfg.solver.restarts = num(line, key, value)?,
                _ => return Err(err(line, format!("unknown field `{key}`"))),
            }
        }
        if version_line.is_none() {
            return Err(err(1, "missing `version = 1`"));
        }
        if !kind_set {
            return Err(err(1, "missing `kind`"));
        }
        if radius_auto {
            cfg.radius = RadiusRule::Schedule { c: radius_c };
        } else if seen.contains_key("r.constant") {
            return Err(err(radius_line, "`r.constant` only applies with `r = auto`"));
        }
        if cfg.seeds.is_empty() {
            return Err(err(seen.get("seeds").copied().unwrap_or(1), "field `seeds` is empty"));
        }
        cfg.solver
            .validate()
            .map_err(|e| err(seen.iter().find(|(k, _)| k.starts_with("solver.")).map_or(1, |(_, l)| *l), e.to_string()))?;
        if cfg.kind.uses_sigma() && cfg.sigma_grid.is_empty() {
            return Err(err(1, format!("kind `{}` needs a `sigma` grid", cfg.kind.name())));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Output directory after the environment override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output.clone(),
        }
    }

    /// SHA-256 of the semantic fields (everything except output and workers),
    /// truncated to 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Canonical `key = value` rendering of the hashed fields. Parsing it back
    /// gives a config with the same hash; `output` and `workers` revert to
    /// their defaults.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("version = {}", self.version),
            format!("kind = {}", self.kind.name()),
            format!("model = {}", self.model),
        ];
        for (k, v) in &self.model_params {
            lines.push(format!("model.{k} = {v}"));
        }
        let join = |v: Vec<String>| v.join(", ");
        lines.push(format!("n = {}", join(self.n_grid.iter().map(|n| n.to_string()).collect())));
        match self.radius {
            RadiusRule::Explicit(r) => lines.push(format!("r = {r:?}")),
            RadiusRule::Schedule { c } => {
                lines.push("r = auto".into());
                lines.push(format!("r.constant = {c:?}"));
            }
        }
        if !self.sigma_grid.is_empty() {
            lines.push(format!("sigma = {}", join(self.sigma_grid.iter().map(|s| format!("{s:?}")).collect())));
        }
        lines.push(format!("seeds = {}", join(self.seeds.iter().map(|s| s.to_string()).collect())));
        let s = &self.solver;
        lines.push(format!(
            "solver.backend = {}",
            match s.backend {
                Backend::CoordinateAscent => "coordinate",
                Backend::GramLowRank => "gram",
            }
        ));
        lines.push(format!(
            "solver.init = {}",
            match s.init {
                Init::Identity => "identity",
                Init::Random => "random",
            }
        ));
        lines.push(format!("solver.feas_tol = {:?}", s.feas_tol));
        lines.push(format!("solver.relaxation = {:?}", s.relaxation));
        lines.push(format!("solver.initial_penalty = {:?}", s.initial_penalty));
        lines.push(format!("solver.penalty_growth = {:?}", s.penalty_growth));
        lines.push(format!("solver.max_outer = {}", s.max_outer));
        lines.push(format!("solver.max_inner = {}", s.max_inner));
        if let Some(k) = s.rank_cap {
            lines.push(format!("solver.rank_cap = {k}"));
        }
        lines.push(format!("solver.stop_tol = {:?}", s.stop_tol));
        lines.push(format!("solver.restarts = {}", s.restarts));
        let t = &self.thresholds;
        lines.push(format!("threshold.gap_rel = {:?}", t.gap_rel));
        lines.push(format!("threshold.residual = {:?}", t.residual));
        lines.push(format!("threshold.residual_floor = {:?}", t.residual_floor));
        lines.push(format!("threshold.max_slope = {:?}", t.max_slope));
        lines.push(format!("threshold.noise_rel = {:?}", t.noise_rel));
        lines.push(format!("tail.n = {}", self.tail.n));
        lines.push(format!("tail.trials = {}", self.tail.trials));
        lines.push(format!("tail.t = {}", join(self.tail.t_grid.iter().map(|v| format!("{v:?}")).collect())));
        lines.push(format!("a_grid = {:?}:{:?}:{:?}", self.a_grid.0, self.a_grid.1, self.a_grid.2));
        lines.push(format!("mc_draws = {}", self.mc_draws));
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "version = 1\nkind = convex_consistency\nmodel = interval\nmodel.length = 1\nn = 50, 100\nseeds = 1,2\n";

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::parse(BASIC).unwrap();
        assert_eq!(cfg.n_grid, vec![50, 100]);
        assert_eq!(cfg.model_params["length"], "1.0");
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn hash_ignores_layout_and_output() {
        let a = ExperimentConfig::parse(BASIC).unwrap();
        let b = ExperimentConfig::parse(
            "# comment\nkind=convex_consistency\nversion=1\nmodel.length = 1.0\nmodel=interval\nn=50,100\nseeds=1, 2\noutput=elsewhere\nworkers=3\n",
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(&BASIC.replace("seeds = 1,2", "seeds = 1,3")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = BASIC.replace("n = 50, 100", "n = 100, 50");
        match ExperimentConfig::parse(&bad) {
            Err(MvuError::Config { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse(&format!("{BASIC}bogus = 3\n")) {
            Err(MvuError::Config { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::parse("kind = oracle_table\n").is_err());
        assert!(ExperimentConfig::parse("version = 2\nkind = oracle_table\n").is_err());
    }
}
