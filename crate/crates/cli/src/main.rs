use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use kinemat_core::braid::BraidRep;
use kinemat_core::fields::Point;
use kinemat_core::harness::{demo_exchange, run_suite, DemoRequest, Report, RunConfig, RunError, Schedule, Suite};
use kinemat_core::KinematError;

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "kinemat", version, about = "Seeded verification suites for local current algebras and braid statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one verification suite and write its JSON report.
    Run(RunArgs),
    /// Demonstrations.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// Trace an exchange schedule and print its braid, permutation and cocycle.
    Exchange(ExchangeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    suite: Option<Suite>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override, `kind=value` or a bare value for every kind.
    #[arg(long = "tol", value_name = "KIND=VALUE")]
    tol: Vec<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    /// Report path; stdout when neither this nor the config names one.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExchangeArgs {
    /// Abelian exchange angle in radians.
    #[arg(long, conflicts_with = "rep")]
    theta: Option<f64>,
    /// JSON braid representation `{"n", "d", "generators"}`.
    #[arg(long)]
    rep: Option<PathBuf>,
    /// JSON list of flow steps, or a diffeomorphism document.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Start points as `x,y;x,y;...`.
    #[arg(long, allow_hyphen_values = true)]
    points: Option<String>,
    #[arg(long)]
    n_points: Option<usize>,
    /// Number of default rotation exchanges when no schedule is given.
    #[arg(long)]
    exchanges: Option<usize>,
    /// Strand trajectories as CSV (`step,strand,x,y`).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON demo report.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(_) => Failure::Usage(e.into()),
            RunError::Numerical { .. } => Failure::Numerical(e.into()),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn parse_tol(arg: &str) -> anyhow::Result<(String, f64)> {
    let (kind, value) = arg.split_once('=').unwrap_or(("all", arg));
    let value: f64 = value.trim().parse().with_context(|| format!("bad tolerance `{arg}`"))?;
    Ok((kind.trim().to_string(), value))
}

fn load_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match (&args.config, args.suite) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_toml(&text)?
        }
        (None, Some(suite)) => RunConfig::new(suite, 0),
        (None, None) => bail!("either --config or --suite is required"),
    };
    if let Some(s) = args.suite {
        cfg.suite = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    for arg in &args.tol {
        let (kind, value) = parse_tol(arg)?;
        cfg.tolerances.insert(kind, value);
    }
    cfg.dim = args.dim.or(cfg.dim);
    cfg.n_points = args.n_points.or(cfg.n_points);
    cfg.hbar = args.hbar.unwrap_or(cfg.hbar);
    cfg.instances = args.instances.or(cfg.instances);
    cfg.mc_samples = args.mc_samples.or(cfg.mc_samples);
    cfg.theta = args.theta.or(cfg.theta);
    if args.report.is_some() {
        cfg.report.clone_from(&args.report);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_summary(report: &Report) {
    for c in &report.checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        eprintln!("{mark}  {}  residual={:.3e} tol={:.1e}", c.name, c.residual, c.tolerance);
    }
    let s = &report.summary;
    eprintln!("{}: {}/{} checks passed", report.suite, s.passed, s.checks);
}

fn run(args: RunArgs) -> Result<u8, Failure> {
    let cfg = load_config(&args).map_err(usage)?;
    let report = run_suite(&cfg)?;
    print_summary(&report);
    let json = report.to_json().map_err(|e| Failure::Numerical(e.into()))?;
    write_output(cfg.report.as_deref(), &json).map_err(usage)?;
    Ok(if report.all_passed() { 0 } else { EXIT_FAILED })
}

fn parse_points(text: &str) -> anyhow::Result<Vec<Point>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let coords = pair
                .split(',')
                .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad coordinate in `{pair}`")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            if coords.len() != 2 {
                bail!("point `{pair}` must have two coordinates");
            }
            Ok(Point::from_vec(coords))
        })
        .collect()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn demo(args: ExchangeArgs) -> Result<u8, Failure> {
    let rep: Option<BraidRep> = args.rep.as_deref().map(read_json).transpose().map_err(usage)?;
    let schedule: Option<Schedule> = args.schedule.as_deref().map(read_json).transpose().map_err(usage)?;
    let points = args.points.as_deref().map(parse_points).transpose().map_err(usage)?;
    let req = DemoRequest { theta: args.theta, rep, schedule, points, n_points: args.n_points, exchanges: args.exchanges };
    let out = demo_exchange(req).map_err(|e| match e {
        KinematError::NearCollision { .. }
        | KinematError::StepUnderflow { .. }
        | KinematError::UnresolvedTie { .. }
        | KinematError::AmbiguousMatch { .. } => Failure::Numerical(e.into()),
        other => Failure::Usage(other.into()),
    })?;
    let r = &out.report;
    println!("braid: {}", r.braid);
    match &r.permutation {
        Some(p) => println!("permutation: {p:?}"),
        None => println!("permutation: none (path is not a closed loop)"),
    }
    match r.phase {
        Some([re, im]) => println!("cocycle: {re:+.12} {im:+.12}i"),
        None => {
            println!("cocycle:");
            for row in &r.cocycle {
                let cells: Vec<String> = row.iter().map(|[re, im]| format!("{re:+.6}{im:+.6}i")).collect();
                println!("  [{}]", cells.join(", "));
            }
        }
    }
    if let Some(path) = &args.csv {
        fs::write(path, out.csv()).with_context(|| format!("writing {}", path.display())).map_err(usage)?;
    }
    if let Some(path) = &args.report {
        let mut json = serde_json::to_string_pretty(r).map_err(|e| usage(anyhow!(e)))?;
        json.push('\n');
        write_output(Some(path), &json).map_err(usage)?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Demo { demo: Demo::Exchange(args) } => demo(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
