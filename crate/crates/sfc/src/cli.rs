//! `sfc run | bench | gen`.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sfc_core::env::{gen_random_env, EnvParams};
use sfc_core::frontend::PlanQuery;
use sfc_core::solver::{optimize_cover_with_clock, Clock, SolverConfig};
use sfc_core::waypoint_opt::HeuristicKind;

use crate::bench::{self, BenchConfig};
use crate::report::RunReport;
use crate::{sfcmap, Result, SfcError, WallClock};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sfc", version, about = "Safe flight corridor optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a corridor for one query and write a JSON report.
    Run(RunArgs),
    /// Run seeded random trials and print a summary table.
    Bench(BenchArgs),
    /// Generate a random SFCMAP environment.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Heuristic {
    Dist,
    Jerk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchHeuristic {
    Dist,
    Jerk,
    Both,
}

impl From<Heuristic> for HeuristicKind {
    fn from(h: Heuristic) -> Self {
        match h {
            Heuristic::Dist => HeuristicKind::MinDist,
            Heuristic::Jerk => HeuristicKind::MinJerk,
        }
    }
}

impl BenchHeuristic {
    fn kinds(self) -> Vec<HeuristicKind> {
        match self {
            Self::Dist => vec![HeuristicKind::MinDist],
            Self::Jerk => vec![HeuristicKind::MinJerk],
            Self::Both => vec![HeuristicKind::MinDist, HeuristicKind::MinJerk],
        }
    }
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut out = [0.0f64; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
        if !slot.is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub start: [f64; 3],
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub goal: [f64; 3],
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "jerk")]
    pub heuristic: Heuristic,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long = "local-range", default_value_t = 2.0)]
    pub local_range: f64,
    /// Initial tube radius; defaults to the map resolution.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub wv: f64,
    #[arg(long, default_value_t = 1.0)]
    pub wc: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long = "outer-max", default_value_t = 10)]
    pub outer_max: usize,
    #[arg(long, default_value_t = 1)]
    pub kmax: usize,
    #[arg(long, default_value_t = 2.0)]
    pub vnom: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "min-dist", default_value_t = 10.0)]
    pub min_dist: f64,
    #[arg(long, value_enum, default_value = "jerk")]
    pub heuristic: BenchHeuristic,
    /// e.g. "l=1.5,2 alpha=2,3"
    #[arg(long)]
    pub sweep: Option<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON-lines destination; records go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = parse_vec3, default_value = "20,20,5")]
    pub size: [f64; 3],
    #[arg(long, default_value_t = 0.1)]
    pub res: f64,
    #[arg(long, default_value_t = 30)]
    pub obstacles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn solver_config(&self, resolution: f64) -> SolverConfig {
        SolverConfig {
            heuristic: self.heuristic.into(),
            alpha: self.alpha,
            local_range: self.local_range,
            eps: self.eps.unwrap_or(resolution),
            w_v: self.wv,
            w_c: self.wc,
            rho: self.rho,
            outer_max: self.outer_max,
            k_max: self.kmax,
            v_nom: self.vnom,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| SfcError::io(path, e))
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let map = sfcmap::load(&args.map)?;
    let cfg = args.solver_config(map.resolution());
    cfg.validate()?;
    let query = PlanQuery { start: args.start, goal: args.goal, clearance: cfg.eps };
    let clock = WallClock::start();
    let result = optimize_cover_with_clock(&map, &query, &cfg, &clock)?;
    let report = RunReport::new(&result, &query, &cfg, clock.seconds());
    log::info!(
        "{} segments, J {:.4} -> {:.4}, {:.2}s",
        result.segment_count(),
        report.iterations.first().map_or(f64::NAN, |m| m.traj_cost),
        report.iterations.last().map_or(f64::NAN, |m| m.traj_cost),
        report.timing.total_s
    );
    let mut json = report.to_json()?;
    json.push('\n');
    write_file(&args.out, &json)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.trials == 0 {
        return Err(SfcError::parse("trials", "must be at least 1"));
    }
    let solver = SolverConfig::default();
    let sweep = match &args.sweep {
        Some(s) => bench::parse_sweep(s)?,
        None => bench::Sweep::default(),
    };
    let variants = bench::variants(
        &args.heuristic.kinds(),
        &sweep.local_range.unwrap_or_else(|| vec![solver.local_range]),
        &sweep.alpha.unwrap_or_else(|| vec![solver.alpha]),
    );
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let cfg = BenchConfig {
        trials: args.trials,
        seed: args.seed,
        min_dist: args.min_dist,
        env: EnvParams::default(),
        solver,
        variants: variants.clone(),
        jobs,
    };
    let records = bench::run_bench(&cfg)?;
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    let stdout_err = |e| SfcError::io("<stdout>", e);
    match &args.out {
        Some(path) => write_file(path, &lines)?,
        None => stdout.write_all(lines.as_bytes()).map_err(stdout_err)?,
    }
    stdout.write_all(bench::summary_table(&records, &variants).as_bytes()).map_err(stdout_err)
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let params = EnvParams {
        size: args.size,
        resolution: args.res,
        obstacle_count: args.obstacles,
        seed: args.seed,
        ..EnvParams::default()
    };
    let map = gen_random_env(&params)?;
    sfcmap::save(&args.out, &map)
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("sfc: {e}");
            if e.is_infeasible() {
                EXIT_INFEASIBLE
            } else {
                EXIT_ERROR
            }
        }
    }
}
