use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use mvu_core::energy::{
    a_grid, continuum_energy_mc, convex_supremum, ellipse_f, find_a_star, oracle_table, oracle_table_csv,
};
use mvu_core::error::{MvuError, Result};
use mvu_core::experiments::{run_experiment, ExperimentConfig};
use mvu_core::graph::{build_graph, radius_schedule};
use mvu_core::manifolds::{make_model, sample, ManifoldModel, ModelParams, PointCloud, Shape};
use mvu_core::points::Points;
use mvu_core::solver::{energy_discrete, feasibility_report, solve, Backend, SolverConfig};

#[derive(Parser)]
#[command(name = "mvu", version, about = "Maximum variance unfolding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Catalog model: interval, rectangle, disk, circle, arc, ellipse, tube.
    #[arg(long)]
    model: String,
    /// Model parameter `key=value` (repeatable), e.g. `--param sigma=0.1`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl ModelArgs {
    fn build(&self) -> Result<ManifoldModel> {
        let mut p = ModelParams::new();
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| MvuError::InvalidParameter(format!("expected key=value, got `{kv}`")))?;
            p.insert(k.trim().to_string(), v.trim().to_string());
        }
        make_model(&self.model, &p)
    }
}

#[derive(Args, Clone)]
struct CloudArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CloudArgs {
    fn cloud(&self) -> Result<PointCloud> {
        sample(&Arc::new(self.model.build()?), self.n, self.seed)
    }
}

#[derive(Args, Clone)]
struct RadiusArgs {
    /// Neighborhood radius, or `auto` for the default schedule.
    #[arg(long, default_value = "auto")]
    r: String,
    /// Constant of the `auto` schedule.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

impl RadiusArgs {
    fn resolve(&self, cloud: &PointCloud) -> Result<f64> {
        if self.r == "auto" {
            radius_schedule(cloud.n(), cloud.model.intrinsic_dim, self.c)
        } else {
            self.r
                .parse()
                .map_err(|_| MvuError::InvalidParameter(format!("cannot parse r=`{}`", self.r)))
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw uniform points from a model (CSV).
    Sample {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the r-neighborhood graph of a sample (edge-list CSV).
    Graph {
        #[command(flatten)]
        cloud: CloudArgs,
        #[command(flatten)]
        radius: RadiusArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve discrete MVU on a sample (embedding CSV).
    Solve {
        #[command(flatten)]
        cloud: CloudArgs,
        #[command(flatten)]
        radius: RadiusArgs,
        #[arg(long, default_value = "coordinate")]
        backend: String,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional per-iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Energy of an embedding CSV, or the continuum energy of a model's
    /// identity map.
    Energy {
        /// Embedding CSV to score.
        #[arg(long, conflicts_with = "model")]
        input: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Monte Carlo draws when no closed form applies.
        #[arg(long, default_value_t = 20_000)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ellipse functional table `a,b,F,E0` over `start:stop:step`.
    Oracle {
        #[arg(long, default_value = "1:1.5707:0.01")]
        grid: String,
        /// Also report the threshold a* on stderr.
        #[arg(long)]
        a_star: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config and write its report files.
    Experiment {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize a report directory and re-score its embeddings.
    Report { dir: PathBuf },
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || MvuError::InvalidParameter(format!("grid `{s}` must be start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    a_grid(v[0], v[1], v[2])
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { cloud, out } => emit(&out, &cloud.cloud()?.points.to_csv()),
        Command::Graph { cloud, radius, out } => {
            let c = cloud.cloud()?;
            let r = radius.resolve(&c)?;
            let g = build_graph(&c, r)?;
            let d = g.diagnostics();
            eprintln!("n={} r={:.6e} edges={} components={}", d.n, d.r, d.edges, d.components);
            emit(&out, &g.to_csv())
        }
        Command::Solve {
            cloud,
            radius,
            backend,
            rank,
            restarts,
            out,
            trace,
        } => {
            let c = cloud.cloud()?;
            let r = radius.resolve(&c)?;
            let g = build_graph(&c, r)?;
            g.require_connected()?;
            let cfg = SolverConfig {
                backend: backend.parse::<Backend>()?,
                rank_cap: rank,
                restarts,
                seed: c.seed,
                ..SolverConfig::default()
            };
            cfg.validate()?;
            let (emb, tr) = solve(&c, &g, &cfg)?;
            let feas = feasibility_report(&c, &g, &emb.y);
            eprintln!(
                "n={} r={:.6e} energy={:.12} identity_energy={:.12} max_violation/r={:.3e} converged={}",
                c.n(),
                r,
                emb.energy,
                energy_discrete(&c.points),
                feas.max_violation / r,
                tr.converged
            );
            if let Some(p) = trace {
                std::fs::write(p, tr.to_csv())?;
            }
            emit(&out, &emb.to_csv())
        }
        Command::Energy {
            input,
            model,
            params,
            m,
            seed,
        } => {
            if let Some(path) = input {
                let y = Points::from_csv(&std::fs::read_to_string(path)?)?;
                if y.len() < 2 {
                    return Err(MvuError::InvalidParameter("need at least two rows".into()));
                }
                println!("method,value,error\ndiscrete,{:.16e},0", energy_discrete(&y));
                return Ok(());
            }
            let name = model.ok_or_else(|| MvuError::InvalidParameter("give --input or --model".into()))?;
            let model = ModelArgs { model: name, params }.build()?;
            let e = match (&model.shape, convex_supremum(&model)) {
                (_, Ok(e)) => e,
                (Shape::Ellipse(spec), _) => {
                    let mut q = ellipse_f(spec.a)?;
                    q.value /= std::f64::consts::PI;
                    q.error /= std::f64::consts::PI;
                    q
                }
                _ => continuum_energy_mc(&model, |x| x.to_vec(), m, seed)?,
            };
            println!("method,value,error\n{:?},{:.16e},{:.3e}", e.method, e.value, e.error);
            Ok(())
        }
        Command::Oracle { grid, a_star, out } => {
            let rows = oracle_table(&parse_grid(&grid)?)?;
            if a_star {
                let s = find_a_star()?;
                match s.a_star {
                    Some(a) => eprintln!("a*={a:.9} monotone_decreasing={}", s.monotone_decreasing),
                    None => eprintln!("a* not found: F stays at or above 2 pi"),
                }
            }
            emit(&out, &oracle_table_csv(&rows))
        }
        Command::Experiment { config, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = output.unwrap_or_else(|| cfg.output_dir());
            let report = run_experiment(&cfg)?;
            report.write(&dir)?;
            println!("experiment {} hash {} -> {}", cfg.kind.name(), report.config_hash, dir.display());
            for c in &report.summary.checks {
                println!(
                    "  [{}] {} = {:.6e} (limit {:.6e})",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit
                );
            }
            Ok(())
        }
        Command::Report { dir } => report(&dir),
    }
}

/// Prints the checks of `summary.json` and re-scores every embedding listed
/// in `report.csv` against its recorded energy.
fn report(dir: &Path) -> Result<()> {
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)
        .map_err(|e| MvuError::InvalidParameter(format!("summary.json: {e}")))?;
    let s = &summary["summary"];
    println!("kind {} hash {}", s["kind"], s["config_hash"]);
    if let Some(checks) = s["checks"].as_array() {
        for c in checks {
            let flag = if c["passed"].as_bool() == Some(true) { "pass" } else { "FAIL" };
            println!("  [{flag}] {} = {} (limit {})", c["name"], c["value"], c["limit"]);
        }
    }
    let csv = dir.join("report.csv");
    if !csv.exists() {
        return Ok(());
    }
    let text = std::fs::read_to_string(csv)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (ie, iemb) = match (col("energy"), col("embedding")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(MvuError::InvalidParameter("report.csv lacks energy/embedding columns".into())),
    };
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.get(iemb).map_or(true, |v| *v == "NA") {
            continue;
        }
        let recorded: f64 = f[ie]
            .parse()
            .map_err(|_| MvuError::InvalidParameter(format!("bad energy `{}`", f[ie])))?;
        let y = Points::from_csv(&std::fs::read_to_string(dir.join(f[iemb]))?)?;
        worst = worst.max((energy_discrete(&y) - recorded).abs());
        checked += 1;
    }
    println!("re-scored {checked} embeddings; max |energy - recorded| = {worst:.3e}");
    if worst > 1e-12 {
        return Err(MvuError::NumericalFailure(format!("re-scored energy differs by {worst:.3e}")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
