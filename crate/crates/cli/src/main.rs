use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use carplan::io::{self, BenchRow, Config};
use carplan::render::{render_svg, RenderOptions};
use carplan::sim::{run_lifelong, run_static, Generator, Instance, Limits, MapSpec, PlannerSpec, RunOutcome};
use carplan::validate::{validate, ValidateOptions};
use carplan::Error;

const EXIT_PLANNER: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

/// Multi-robot motion planning for car-like robots.
///
/// Exit codes: 0 success, 1 planner failure (or a dirty validation
/// report), 2 invalid input, 3 timeout.
#[derive(Parser, Debug)]
#[command(name = "carplan", version)]
struct Cli {
    /// TOML configuration file. Defaults to $CARPLAN_CONFIG, then to the
    /// built-in parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write random scenarios as JSON files.
    Generate(GenerateArgs),
    /// Solve a static scenario and write the trajectories as CSV.
    Solve(SolveArgs),
    /// Run a lifelong scenario, where robots receive goals one after another.
    Lifelong(LifelongArgs),
    /// Check trajectories against a scenario.
    Validate(ValidateArgs),
    /// Draw a scenario and optionally its trajectories as SVG.
    Render(RenderArgs),
    /// Run planners over a directory of scenarios and write a CSV table.
    Bench(BenchArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Map as WIDTHxHEIGHT[:OBSTACLES].
    #[arg(long, default_value = "100x100:50")]
    map: MapSpec,
    /// Robots per scenario.
    #[arg(long, short = 'n', default_value_t = 60)]
    robots: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Goals per robot; more than one makes lifelong scenarios.
    #[arg(long, default_value_t = 1)]
    goals: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; files are named inst000.json, inst001.json, ...
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct PlannerArgs {
    /// pbcr-v0, pbcr-v1, pbcr-v2, eccr or clcbs (eccr with ratio 1).
    #[arg(long, default_value = "pbcr-v2")]
    algo: String,
    /// Suboptimality ratio of eccr.
    #[arg(long)]
    subopt: Option<f64>,
    /// Wall-clock limit in seconds; 0 disables it.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    scenario: PathBuf,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Trajectory CSV to write.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LifelongArgs {
    scenario: PathBuf,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Replanning window of eccr in steps.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    scenario: PathBuf,
    trajectories: PathBuf,
    /// Skip the check that every robot ends at its goal.
    #[arg(long)]
    no_goals: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    scenario: PathBuf,
    trajectories: Option<PathBuf>,
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Draw a footprint every this many steps; 0 draws none.
    #[arg(long, default_value_t = 4)]
    stride: usize,
    /// Pixels per map unit.
    #[arg(long, default_value_t = 8.0)]
    scale: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Directory of scenario JSON files.
    dir: PathBuf,
    /// Comma-separated planners.
    #[arg(long, default_value = "pbcr-v2")]
    algo: String,
    #[arg(long)]
    subopt: Option<f64>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// Parallel runs; defaults to the number of CPUs.
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
    /// Leave the runtime column empty so that output is reproducible.
    #[arg(long)]
    no_runtime: bool,
    /// CSV to write; stdout when absent.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Timeout(_) => EXIT_TIMEOUT,
                Error::Infeasible { .. } | Error::NoSolution => EXIT_PLANNER,
                _ => EXIT_INPUT,
            })
        }
    }
}

fn run(cli: Cli) -> carplan::Result<u8> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => generate(&cfg, a),
        Command::Solve(a) => {
            let inst = load(&cfg, &a.scenario)?;
            let (spec, limits) = planner(&cfg, &a.planner)?;
            let out = run_static(&inst, &spec, &limits)?;
            finish(&out, a.out.as_deref())
        }
        Command::Lifelong(a) => {
            let inst = load(&cfg, &a.scenario)?;
            let (spec, mut limits) = planner(&cfg, &a.planner)?;
            if let Some(w) = a.window {
                limits.window = w;
            }
            let out = run_lifelong(&inst, &spec, &limits)?;
            finish(&out, a.out.as_deref())
        }
        Command::Validate(a) => {
            let inst = load(&cfg, &a.scenario)?;
            let trajs = io::read_trajectories(&a.trajectories, &inst.model)?;
            let opts = ValidateOptions {
                check_goals: !a.no_goals,
                ..Default::default()
            };
            let report = validate(&inst, &trajs, &opts);
            print!("{report}");
            Ok(if report.is_clean() { 0 } else { EXIT_PLANNER })
        }
        Command::Render(a) => {
            let inst = load(&cfg, &a.scenario)?;
            let trajs = match &a.trajectories {
                Some(p) => io::read_trajectories(p, &inst.model)?,
                None => Vec::new(),
            };
            let opts = RenderOptions {
                scale: a.scale,
                footprint_stride: a.stride,
                ..Default::default()
            };
            std::fs::write(&a.out, render_svg(&inst, &trajs, &opts))?;
            Ok(0)
        }
        Command::Bench(a) => bench(&cfg, a),
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(0)
        }
    }
}

fn load(cfg: &Config, path: &Path) -> carplan::Result<Instance> {
    io::read_scenario(path, &cfg.model()?)
}

fn planner(cfg: &Config, a: &PlannerArgs) -> carplan::Result<(PlannerSpec, Limits)> {
    let spec = PlannerSpec::parse(&a.algo, cfg.pbcr()?, cfg.eccr(), a.subopt)?;
    let mut limits = cfg.limits();
    if let Some(t) = a.time_limit {
        limits.time_limit = (t > 0.0).then_some(t);
    }
    if let Some(m) = a.max_steps {
        limits.max_steps = m;
    }
    Ok((spec, limits))
}

fn finish(out: &RunOutcome, path: Option<&Path>) -> carplan::Result<u8> {
    if let Some(p) = path {
        io::write_trajectories(p, &out.trajectories)?;
    }
    println!("{}", serde_json::to_string(&out.metrics).expect("metrics serialize"));
    let m = &out.metrics;
    Ok(if m.success {
        0
    } else if m.timed_out {
        EXIT_TIMEOUT
    } else {
        EXIT_PLANNER
    })
}

fn generate(cfg: &Config, a: GenerateArgs) -> carplan::Result<u8> {
    let generator = Generator::new(a.map, cfg.model()?, cfg.disc()?);
    std::fs::create_dir_all(&a.out)?;
    for k in 0..a.count {
        let mut inst = generator.instance(a.robots, a.goals, a.seed.wrapping_add(k as u64))?;
        inst.name = format!("inst{k:03}");
        io::write_scenario(&a.out.join(format!("{}.json", inst.name)), &inst)?;
    }
    eprintln!("wrote {} scenario(s) to {}", a.count, a.out.display());
    Ok(0)
}

fn bench(cfg: &Config, a: BenchArgs) -> carplan::Result<u8> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&a.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let model = cfg.model()?;
    let instances: Vec<Instance> = paths
        .iter()
        .map(|p| io::read_scenario(p, &model))
        .collect::<carplan::Result<_>>()?;
    let mut jobs: Vec<(usize, PlannerSpec)> = Vec::new();
    let mut limits = cfg.limits();
    if let Some(t) = a.time_limit {
        limits.time_limit = (t > 0.0).then_some(t);
    }
    if let Some(m) = a.max_steps {
        limits.max_steps = m;
    }
    if let Some(w) = a.window {
        limits.window = w;
    }
    for algo in a.algo.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let spec = PlannerSpec::parse(algo, cfg.pbcr()?, cfg.eccr(), a.subopt)?;
        jobs.extend((0..instances.len()).map(|i| (i, spec)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let results: Vec<carplan::Result<BenchRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, spec)| {
                let inst = &instances[i];
                let out = if inst.is_lifelong() {
                    run_lifelong(inst, &spec, &limits)?
                } else {
                    run_static(inst, &spec, &limits)?
                };
                Ok(BenchRow {
                    instance: inst.name.clone(),
                    algo: spec.to_string(),
                    n: inst.n(),
                    metrics: out.metrics,
                })
            })
            .collect()
    });
    let rows = results.into_iter().collect::<carplan::Result<Vec<_>>>()?;
    let text = io::bench_csv(&rows, !a.no_runtime);
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
