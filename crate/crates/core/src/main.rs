use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ibo::engine::{run_bo_with, StrategyKind};
use ibo::problems::{problem_by_name, PROBLEM_NAMES};
use ibo::reporting::{
    append_trace_record, export, parse_config, read_trace_dir, summarize, trace_file_name, BudgetMode, ExportFormat,
};

#[derive(Parser)]
#[command(name = "ibo", version, about = "Cost-aware multi-task Bayesian optimization of SGD hyperparameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, seed) pair of an experiment and write traces.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run only this strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// How the closing summary aligns traces.
        #[arg(long, default_value = "iterations")]
        budget_mode: String,
    },
    /// Aggregate traces in a directory into a table and export it.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long, default_value = "cost")]
        budget_mode: String,
    },
    /// List the built-in problems.
    ListProblems,
}

struct CliError {
    kind: &'static str,
    message: String,
    code: u8,
}

impl CliError {
    fn new(kind: &'static str, e: impl std::fmt::Display) -> Self {
        Self { kind, message: e.to_string(), code: 1 }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            fail(&CliError { kind: "usage", message: first.to_string(), code: 2 });
            eprint!("{text}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run { config, seed, strategy, out, budget_mode } => run(config, seed, strategy, out, &budget_mode),
        Command::Summarize { input, format, budget_mode } => summarize_dir(input, &format, &budget_mode),
        Command::ListProblems => list_problems(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            fail(&e);
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn fail(e: &CliError) {
    eprintln!("{}", json!({ "error": e.kind, "message": e.message }));
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    strategy: Option<String>,
    out: Option<PathBuf>,
    budget_mode: &str,
) -> Result<(), CliError> {
    let mode: BudgetMode = budget_mode.parse().map_err(|e| CliError::new("usage", e))?;
    let text = fs::read_to_string(&config).map_err(|e| CliError::new("io", format!("{}: {e}", config.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| CliError::new("config", e))?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(s) = strategy {
        cfg.strategies = vec![s.parse::<StrategyKind>().map_err(|e| CliError::new("config", e))?];
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    cfg.validate().map_err(|e| CliError::new("config", e))?;
    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::new("io", format!("{}: {e}", cfg.output_dir.display())))?;
    let problem = problem_by_name(&cfg.problem).map_err(|e| CliError::new("config", e))?;

    let mut traces = Vec::new();
    for &strategy in &cfg.strategies {
        for &seed in &cfg.seeds {
            let run_cfg = cfg.run_config(strategy, seed);
            let path = cfg.output_dir.join(trace_file_name(&cfg.problem, strategy, seed));
            if path.exists() {
                fs::remove_file(&path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
            }
            let mut sink = |r: &ibo::engine::TraceRecord| {
                append_trace_record(&path, r).map_err(|e| std::io::Error::other(e.to_string()))
            };
            let trace = run_bo_with(strategy, problem.as_ref(), &run_cfg, &mut sink)
                .map_err(|e| CliError::new("run", format!("{} seed {seed}: {e}", strategy)))?;
            let last = trace.last().expect("runs record at least the initial design");
            eprintln!(
                "{strategy} seed {seed}: {} evaluations, cost {:.4}, incumbent value {:.6} -> {}",
                trace.len(),
                last.cum_cost,
                last.incumbent_true,
                path.display()
            );
            traces.push(trace);
        }
    }
    let table = summarize(&traces, mode).map_err(|e| CliError::new("summary", e))?;
    print!("{table}");
    Ok(())
}

fn summarize_dir(input: PathBuf, format: &str, budget_mode: &str) -> Result<(), CliError> {
    let format: ExportFormat = format.parse().map_err(|e| CliError::new("usage", e))?;
    let mode: BudgetMode = budget_mode.parse().map_err(|e| CliError::new("usage", e))?;
    let all = read_trace_dir(&input).map_err(|e| CliError::new("io", e))?;
    if all.is_empty() {
        return Err(CliError::new("summary", format!("no .jsonl traces in {}", input.display())));
    }
    let mut by_problem: std::collections::BTreeMap<String, Vec<_>> = Default::default();
    for (path, trace) in all {
        let first = trace
            .first()
            .ok_or_else(|| CliError::new("summary", format!("trace {} is empty", path.display())))?;
        by_problem.entry(first.problem.clone()).or_default().push(trace);
    }
    for traces in by_problem.values() {
        let table = summarize(traces, mode).map_err(|e| CliError::new("summary", e))?;
        print!("{table}");
        let path = export(&table, traces, format, &input).map_err(|e| CliError::new("io", e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn list_problems() -> Result<(), CliError> {
    for name in PROBLEM_NAMES {
        let p = problem_by_name(name).map_err(|e| CliError::new("problem", e))?;
        let dims: Vec<&str> = p.space().dims().iter().map(|d| d.name.as_str()).collect();
        println!("{name}\t{}", dims.join(","));
    }
    Ok(())
}
