mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use projsplit::io::{load_problem, load_problem_pair, save_manifest, save_problem, save_trace, TraceFormat};
use projsplit::lasso::{ista_oracle, partition_rows, run_comparison, LambdaRule, ObjectiveStop};
use projsplit::operators::CgCap;
use projsplit::{beta_from_alpha, solve, LassoProblem, RandomSpec, SolverConfig, Status};
use serde::Serialize;

use config::Overrides;

const EXIT_USAGE: u8 = 1;
const EXIT_CAP: u8 = 2;
const EXIT_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "projsplit", version, about = "Inertial relaxed projective splitting for LASSO problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and optionally write its iterate trace.
    Solve(SolveArgs),
    /// Compare a baseline against the configured variant.
    Compare(CompareArgs),
    /// Tabulate β̄(ᾱ) over a grid, solving at each feasible point when a problem is given.
    Sweep(SweepArgs),
    /// Generate a seeded random instance and its manifest.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args)]
struct ProblemArgs {
    /// CSV with rows (q_1, ..., q_d, b).
    #[arg(long, conflicts_with = "gen")]
    problem: Option<PathBuf>,
    /// Separate right-hand side; `--problem` then holds Q alone.
    #[arg(long, requires = "problem")]
    rhs: Option<PathBuf>,
    /// Random instance `m,d,r,seed`.
    #[arg(long, value_parser = parse_gen)]
    gen: Option<RandomSpec>,
    /// Replaces the seed of `--gen`.
    #[arg(long)]
    seed: Option<u64>,
    /// Partition size for file problems.
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    /// Fixed λ instead of 0.1 ‖Qᵀb‖_∞.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    /// TOML file with any of the solver flags (snake_case keys).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Header row for CSV traces.
    #[arg(long)]
    header: bool,
    /// Writes the solution, one coordinate per line.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// α = 0, β = 1, σ = 0.
    Classical,
    /// The configured variant against itself.
    Same,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of generated instances, seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    instances: u64,
    #[arg(long, value_enum, default_value_t = Baseline::Classical)]
    baseline: Baseline,
    /// Objective-gap tolerance of the stopping rule.
    #[arg(long = "gap", default_value_t = 1e-4)]
    gap: f64,
    /// JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Comma-separated ᾱ grid.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2,0.25,0.3")]
    alpha_bars: Vec<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Shape and seed `m,d,r,seed`.
    #[arg(long, value_parser = parse_gen)]
    gen: RandomSpec,
    #[arg(long)]
    seed: Option<u64>,
    /// Problem CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the output path with extension `manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn parse_gen(s: &str) -> std::result::Result<RandomSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [m, d, r, seed] = parts.as_slice() else {
        return Err(format!("expected m,d,r,seed, got {s:?}"));
    };
    let num = |v: &str, name: &str| v.parse::<usize>().map_err(|e| format!("{name}: {e}"));
    Ok(RandomSpec {
        m: num(m, "m")?,
        d: num(d, "d")?,
        r: num(r, "r")?,
        seed: seed.parse().map_err(|e| format!("seed: {e}"))?,
    })
}

impl ProblemArgs {
    fn spec(&self) -> Option<RandomSpec> {
        self.gen.map(|g| RandomSpec {
            seed: self.seed.unwrap_or(g.seed),
            ..g
        })
    }

    /// Named instances; `count` only applies to generated problems.
    fn load(&self, count: u64) -> Result<Vec<(String, LassoProblem)>> {
        if let Some(spec) = self.spec() {
            return (0..count.max(1))
                .map(|i| {
                    let spec = RandomSpec {
                        seed: spec.seed + i,
                        ..spec
                    };
                    let (p, _) = projsplit::lasso::random_instance(spec)?;
                    Ok((format!("random {}x{} r={} seed {}", spec.m, spec.d, spec.r, spec.seed), p))
                })
                .collect();
        }
        let Some(path) = &self.problem else {
            bail!("one of --problem or --gen is required");
        };
        let (q, b) = match &self.rhs {
            Some(rhs) => load_problem_pair(path, rhs),
            None => load_problem(path),
        }
        .with_context(|| format!("loading {}", path.display()))?;
        let partition = partition_rows(q.nrows(), self.blocks)?;
        let rule = self.lambda.map_or(LambdaRule::Default, LambdaRule::Fixed);
        Ok(vec![(path.display().to_string(), LassoProblem::new(q, b, partition, rule)?)])
    }

    fn load_one(&self) -> Result<LassoProblem> {
        Ok(self.load(1)?.remove(0).1)
    }
}

impl SolverArgs {
    fn overrides(&self) -> Result<Overrides> {
        config::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    status: Status,
    iterations: usize,
    objective: f64,
    lambda: f64,
    f_star: Option<f64>,
    residual_primal: Option<f64>,
    residual_dual: Option<f64>,
}

fn exit_for(status: &Status) -> u8 {
    match status {
        Status::Converged | Status::StoppedStep3 => 0,
        Status::CapReached | Status::Continuing => EXIT_CAP,
        Status::Failed { .. } => EXIT_FAILED,
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let problem = args.problem.load_one()?;
    let overrides = args.solver.overrides()?;
    let config = overrides.resolve()?;
    let split = problem.splitting(CgCap::default())?;
    let f_star = match overrides.objective_tol {
        Some(_) => Some(ista_oracle(&problem, 1e-10, 1_000_000)?.objective),
        None => None,
    };
    let mut monitor = ObjectiveStop {
        problem: &problem,
        f_star,
        tol: overrides.objective_tol.unwrap_or(0.0),
    };
    let result = solve(&split, &config, None, Some(&mut monitor))?;
    if let Some(path) = &args.trace {
        let format = match args.format {
            Format::Jsonl => TraceFormat::Jsonl,
            Format::Csv => TraceFormat::Csv { header: args.header },
        };
        save_trace(path, &result.trace, format).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.solution {
        let mut w = BufWriter::new(File::create(path)?);
        for v in result.primal() {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
    }
    let last = result.trace.last();
    let summary = SolveSummary {
        status: result.status,
        iterations: result.iterations(),
        objective: problem.objective(result.primal())?,
        lambda: problem.lambda(),
        f_star,
        residual_primal: last.map(|r| r.residual_primal),
        residual_dual: last.map(|r| r.residual_dual),
    };
    println!("{}", serde_json::to_string(&summary)?);
    if let Status::Failed { .. } = result.status {
        eprintln!("{}", serde_json::json!({ "error": "resolvent", "status": result.status }));
    }
    Ok(exit_for(&result.status))
}

fn cmd_compare(args: &CompareArgs) -> Result<u8> {
    let instances = args.problem.load(args.instances)?;
    let variant = args.solver.overrides()?.resolve()?;
    let baseline = match args.baseline {
        Baseline::Classical => SolverConfig {
            max_outer: variant.max_outer,
            ..SolverConfig::classical()
        },
        Baseline::Same => variant.clone(),
    };
    let report = run_comparison(&instances, &baseline, &variant, args.gap)?;
    print!("{}", report.render_table());
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    if report.excluded.is_empty() {
        Ok(0)
    } else {
        eprintln!("{}", serde_json::json!({ "error": "not converged", "excluded": report.excluded }));
        Ok(EXIT_CAP)
    }
}

#[derive(Debug, Serialize)]
struct SweepRow {
    alpha_bar: f64,
    beta_bar: f64,
    feasible: bool,
    status: Option<Status>,
    iterations: Option<usize>,
    objective: Option<f64>,
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8> {
    let overrides = args.solver.overrides()?;
    let alpha = overrides.alpha.unwrap_or(0.1);
    let problem = if args.problem.problem.is_some() || args.problem.gen.is_some() {
        Some(args.problem.load_one()?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for &alpha_bar in &args.alpha_bars {
        let beta_bar = beta_from_alpha(alpha_bar)?;
        let feasible = alpha < alpha_bar;
        let mut row = SweepRow {
            alpha_bar,
            beta_bar,
            feasible,
            status: None,
            iterations: None,
            objective: None,
        };
        if let (true, Some(problem)) = (feasible, &problem) {
            let config = Overrides {
                alpha_bar: Some(alpha_bar),
                beta: None,
                ..overrides.clone()
            }
            .resolve()?;
            let result = solve(&problem.splitting(CgCap::default())?, &config, None, None)?;
            row.status = Some(result.status);
            row.iterations = Some(result.iterations());
            row.objective = Some(problem.objective(result.primal())?);
        }
        rows.push(row);
    }
    println!("alpha_bar,beta_bar,feasible,status,iterations,objective");
    for r in &rows {
        let status = r.status.map(|s| serde_json::to_value(s).unwrap()["status"].as_str().unwrap_or("").to_string());
        println!(
            "{},{},{},{},{},{}",
            r.alpha_bar,
            r.beta_bar,
            if r.feasible { "yes" } else { "infeasible" },
            status.unwrap_or_default(),
            r.iterations.map(|v| v.to_string()).unwrap_or_default(),
            r.objective.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    if let Some(path) = &args.report {
        write_json(path, &rows)?;
    }
    Ok(0)
}

fn cmd_gen(args: &GenArgs) -> Result<u8> {
    let spec = RandomSpec {
        seed: args.seed.unwrap_or(args.gen.seed),
        ..args.gen
    };
    let (problem, manifest) = projsplit::lasso::random_instance(spec)?;
    save_problem(&args.out, problem.q(), problem.b())?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| args.out.with_extension("manifest.json"));
    save_manifest(&manifest_path, &manifest)?;
    println!("{}", serde_json::to_string(&manifest)?);
    Ok(0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::from(EXIT_USAGE)
        }
    }
}
