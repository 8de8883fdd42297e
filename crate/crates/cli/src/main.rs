use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hpi_parego::benchmarks::{task_budget, Task};
use hpi_parego::harness::{history_path, run_optimizer, run_suite, Overrides, SuiteConfig};
use hpi_parego::history::RunHistory;
use hpi_parego::metrics::{hypervolume_2d, reference_point};
use hpi_parego::optimizer::{AnchorMode, ScheduleKind};
use hpi_parego::report::{build_report, load_histories, pareto_records, write_report, CURVE_RESOLUTION};

#[derive(Parser)]
#[command(name = "hpi-parego", version, about = "Multi-objective HPO with importance-driven space reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer on one task and store its history.
    Run(RunArgs),
    /// Run every (task, optimizer, seed) cell of a suite file.
    Suite {
        /// Suite definition (JSON).
        config: PathBuf,
        /// Parallel cells; defaults to the available cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarise a directory of histories into curves.csv, auc.csv and plot.svg.
    Report {
        /// Directory searched recursively for histories.
        histories: PathBuf,
        /// Where to write the report; defaults to the history directory.
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Print the non-dominated records of a history.
    Pareto {
        history: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    optimizer: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation budget; defaults to the task's budget rule.
    #[arg(long)]
    trials: Option<usize>,
    /// Number of hyperparameters of the task.
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long, default_value = "results")]
    outdir: PathBuf,
    /// Importance threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Threshold schedule: symmetric, constant, init_phase or conv_phase.
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    /// Source of pinned values: incumbent, default or random.
    #[arg(long)]
    anchor: Option<AnchorMode>,
    /// Chance of a random configuration per iteration.
    #[arg(long)]
    r: Option<f64>,
    /// Iterations between weight resamples.
    #[arg(long)]
    u: Option<usize>,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let task = Task::by_name(&args.task, args.dimension)?;
    let budget = args.trials.unwrap_or_else(|| task_budget(task.dimension(), 1));
    let overrides = Overrides {
        tau: args.tau,
        schedule: args.schedule,
        anchor: args.anchor,
        r: args.r,
        u: args.u,
        ..Overrides::default()
    };
    let started = Instant::now();
    let history = run_optimizer(&task, &args.optimizer, budget, args.seed, &overrides)?;
    let elapsed = started.elapsed();
    let path = history_path(&args.outdir, task.name(), &args.optimizer, args.seed);
    history
        .write(&path)
        .with_context(|| format!("cannot write {}", path.display()))?;

    let objectives = history.objectives();
    let reference = reference_point(&objectives).context("empty history")?;
    let hv = hypervolume_2d(&objectives, &reference)?;
    println!("history: {} ({} records)", path.display(), history.len());
    println!("final hypervolume: {hv:.6} (reference point {reference:?})");
    println!("runtime: {:.2}s", elapsed.as_secs_f64());
    Ok(())
}

fn cmd_suite(config: &Path, workers: Option<usize>) -> Result<bool> {
    let config = SuiteConfig::read(config).with_context(|| format!("cannot load suite {}", config.display()))?;
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = run_suite(&config, workers)?;
    println!(
        "completed {}, skipped {}, failed {}",
        summary.completed,
        summary.skipped,
        summary.failures.len()
    );
    for (path, message) in &summary.failures {
        eprintln!("failed: {}: {message}", path.display());
    }
    Ok(summary.failures.is_empty())
}

fn cmd_report(histories: &Path, outdir: Option<PathBuf>) -> Result<()> {
    let (loaded, mut warnings) = load_histories(histories)?;
    if loaded.is_empty() {
        bail!("no histories found under {}", histories.display());
    }
    let report = build_report(&loaded, CURVE_RESOLUTION)?;
    warnings.extend(report.warnings.iter().cloned());
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let outdir = outdir.unwrap_or_else(|| histories.to_path_buf());
    write_report(&report, &outdir)?;
    println!(
        "{} histories, {} optimizers; wrote curves.csv, auc.csv and plot.svg to {}",
        loaded.len(),
        report.aggregate.curves.len(),
        outdir.display()
    );
    Ok(())
}

fn cmd_pareto(path: &Path) -> Result<()> {
    let history = RunHistory::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let space = &history.meta.space;
    let mut header: Vec<String> = vec!["trial".into()];
    header.extend(space.params().iter().map(|p| p.name().to_string()));
    header.extend((1..=history.meta.objectives).map(|k| format!("f{k}")));
    println!("{}", header.join(","));
    for record in pareto_records(&history) {
        let mut row = vec![record.trial.to_string()];
        row.extend(space.params().iter().zip(record.config.values()).map(|(p, v)| p.format_value(v)));
        row.extend(record.objectives.iter().map(|f| f.to_string()));
        println!("{}", row.join(","));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args).map(|()| true),
        Command::Suite { config, workers } => cmd_suite(&config, workers),
        Command::Report { histories, outdir } => cmd_report(&histories, outdir).map(|()| true),
        Command::Pareto { history } => cmd_pareto(&history).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
