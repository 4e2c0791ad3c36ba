//! `noma-lddp`: solve single instances, run seeded sweeps and scheduling
//! experiments, and self-check the solvers.
//!
//! Exit codes: 0 on success, 1 when a run or a check fails, 2 on bad input.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use noma_lddp::config::{ScheduleConfig, SweepConfig};
use noma_lddp::instance::{read_instance, sic_order};
use noma_lddp::lddp::LddpParams;
use noma_lddp::rate::rate_continuous;
use noma_lddp::scheduler::{grouping_histogram, run_schedule, ResolvePer, SlotTrace};
use noma_lddp::scheme::{solve_scheme, Scheme};
use noma_lddp::sweep::{run_sweep, write_sweep_csv};
use noma_lddp::verify::run_checks;

#[derive(Debug, Parser)]
#[command(name = "noma-lddp", version, about = "Joint power and subcarrier allocation for multi-carrier NOMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance file and print a one-row summary CSV.
    Solve(SolveArgs),
    /// Run a TOML sweep config; one CSV row per (seed, K, M, J, solver).
    Sweep(SweepArgs),
    /// Run a TOML proportional-fair scheduling config.
    Schedule(ScheduleArgs),
    /// Check the solvers against the exhaustive oracles and invariants.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "lddp")]
    solver: Scheme,
    /// Summary CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the powered cells as `user,subcarrier,power,rate`.
    #[arg(long)]
    allocation: Option<PathBuf>,
    /// Skip the upper bound.
    #[arg(long)]
    no_bound: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Run only these solvers instead of the configured list.
    #[arg(long, value_delimiter = ',')]
    solver: Vec<Scheme>,
    /// Append a wall-time column. The output is then no longer reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the per-slot, summary and grouping CSVs. Without it
    /// only the summary is printed.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    solver: Vec<Scheme>,
    #[arg(long)]
    resolve_per: Option<ResolvePer>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Failure classes, mapped to exit codes 2 and 1.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep(args),
        Command::Schedule(args) => schedule(args),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage(anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    Ok(())
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))
        .map_err(usage)?;
    let mut params = LddpParams {
        upper_bound: !args.no_bound,
        ..LddpParams::default()
    };
    if let Some(n) = args.max_iterations {
        if n == 0 {
            return Err(usage(anyhow!("--max-iterations must be at least 1")));
        }
        params.max_iterations = n;
    }
    let outcome = solve_scheme(args.solver, &inst, &inst.weights, &params).map_err(usage)?;
    let ub = outcome.upper_bound.as_ref().map(|b| b.value);
    let gap = match (outcome.lower_bound, ub) {
        (Some(lb), Some(ub)) if ub > 0.0 => Some((ub - lb) / ub),
        _ => None,
    };

    let mut out = output(args.out.as_deref())?;
    writeln!(out, "solver,K,N,M,J,utility,v_lb,v_ub,gap,iterations,total_power")
        .context("writing summary")?;
    writeln!(
        out,
        "{},{},{},{},{},{:.9e},{},{},{},{},{:.9e}",
        args.solver,
        inst.users(),
        inst.subcarriers(),
        inst.max_multiplexed,
        inst.levels,
        outcome.utility,
        optional(outcome.lower_bound),
        optional(ub),
        optional(gap),
        outcome.iterations.map(|i| i.to_string()).unwrap_or_default(),
        outcome.allocation.total(),
    )
    .context("writing summary")?;
    out.flush().context("writing summary")?;

    if let Some(path) = &args.allocation {
        let order = sic_order(&inst);
        let mut cells = output(Some(path))?;
        writeln!(cells, "user,subcarrier,power,rate").context("writing allocation")?;
        for k in 0..inst.users() {
            for n in 0..inst.subcarriers() {
                let p = outcome.allocation.get(k, n);
                if p > 0.0 {
                    let r = rate_continuous(&inst, &order, &outcome.allocation, k, n);
                    writeln!(cells, "{k},{n},{p:.9e},{r:.9e}").context("writing allocation")?;
                }
            }
        }
        cells.flush().context("writing allocation")?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut cfg = SweepConfig::parse(&read_text(&args.config)?)
        .with_context(|| format!("in {}", args.config.display()))
        .map_err(usage)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !args.solver.is_empty() {
        cfg.solvers = args.solver;
    }
    cfg.validate().map_err(usage)?;
    set_threads(args.threads)?;
    let rows = run_sweep(&cfg).context("running the sweep")?;
    let mut out = output(args.out.as_deref())?;
    write_sweep_csv(&rows, args.timing, &mut out).context("writing the sweep CSV")?;
    out.flush().context("writing the sweep CSV")?;
    Ok(())
}

fn schedule(args: ScheduleArgs) -> Result<(), Failure> {
    let mut cfg = ScheduleConfig::parse(&read_text(&args.config)?)
        .with_context(|| format!("in {}", args.config.display()))
        .map_err(usage)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !args.solver.is_empty() {
        cfg.solvers = args.solver;
    }
    if let Some(mode) = args.resolve_per {
        cfg.resolve_per = mode;
    }
    cfg.validate().map_err(usage)?;
    set_threads(args.threads)?;

    let params = cfg.params();
    let runs: Vec<(Scheme, u64)> = cfg
        .solvers
        .iter()
        .flat_map(|&s| cfg.seeds().map(move |seed| (s, seed)))
        .collect();
    let traces: Vec<SlotTrace> = runs
        .par_iter()
        .map(|&(scheme, seed)| run_schedule(&params, scheme, seed))
        .collect::<Result<_, _>>()
        .context("running the scheduler")?;

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &traces {
            let path = dir.join(format!("slots-{}-{}.csv", t.scheme, t.seed));
            let mut out = output(Some(&path))?;
            t.write_csv(&mut out).context("writing slot CSV")?;
            out.flush().context("writing slot CSV")?;
        }
        let mut grouping = output(Some(&dir.join("grouping.csv")))?;
        write_grouping(&traces, cfg.users, &mut grouping).context("writing grouping CSV")?;
        let mut summary = output(Some(&dir.join("summary.csv")))?;
        write_summary(&traces, &mut summary).context("writing summary CSV")?;
    } else {
        let mut summary = output(None)?;
        write_summary(&traces, &mut summary).context("writing summary CSV")?;
    }
    Ok(())
}

fn write_summary(traces: &[SlotTrace], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "solver,seed,jain,throughput,edge_users,edge_mean,center_mean,pairs,mean_pair_difference")?;
    for t in traces {
        let jain = t.jain().map(|j| format!("{j:.9e}")).unwrap_or_default();
        let edge = t.edge_stats();
        let throughput: f64 = t.period_average().iter().sum();
        let pairs = t.pair_differences.len();
        let mean_diff = (pairs > 0).then(|| t.pair_differences.iter().sum::<usize>() as f64 / pairs as f64);
        writeln!(
            out,
            "{},{},{jain},{throughput:.9e},{},{},{},{pairs},{}",
            t.scheme,
            t.seed,
            edge.edge_users,
            optional(edge.edge_mean),
            optional(edge.center_mean),
            optional(mean_diff),
        )?;
    }
    out.flush()
}

fn write_grouping(traces: &[SlotTrace], users: usize, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "solver,difference,count")?;
    let mut schemes: Vec<Scheme> = traces.iter().map(|t| t.scheme).collect();
    schemes.dedup();
    for scheme in schemes {
        let diffs = traces
            .iter()
            .filter(|t| t.scheme == scheme)
            .flat_map(|t| t.pair_differences.iter().copied());
        for (d, count) in grouping_histogram(users, diffs).iter().enumerate().skip(1) {
            writeln!(out, "{scheme},{d},{count}")?;
        }
    }
    out.flush()
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let checks = run_checks(args.seed);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(Failure::Run(anyhow!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
