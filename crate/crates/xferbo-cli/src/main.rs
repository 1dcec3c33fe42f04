use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use xferbo_cli::config::ExperimentConfig;
use xferbo_cli::runner::RunStatus;
use xferbo_cli::{runner, summary};

#[derive(Parser)]
#[command(name = "xferbo", version, about = "Constrained Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file
    Run {
        /// Experiment config (or a manifest.json from a previous run)
        #[arg(long)]
        config: PathBuf,
        /// Parallel runs; 0 means one worker per CPU
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output directory, overriding the config's `out` field
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild summary tables from the history files in a results directory
    Summarize {
        /// Directory holding history_*.csv files
        #[arg(long = "in", value_name = "DIR")]
        dir: PathBuf,
    },
    /// List the built-in benchmark cases
    ListCases,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Run { config, jobs, out } => cmd_run(&config, jobs, out),
        Command::Summarize { dir } => cmd_summarize(&dir),
        Command::ListCases => cmd_list_cases(),
    };
    std::process::exit(code);
}

fn cmd_run(path: &PathBuf, jobs: usize, out: Option<PathBuf>) -> i32 {
    let mut config = match ExperimentConfig::load(path) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    match std::env::var("XFERBO_SEED") {
        Ok(raw) => match raw.trim().parse::<u64>() {
            Ok(seed) => config.seed = seed,
            Err(_) => {
                eprintln!("error: XFERBO_SEED must be an unsigned integer, got '{raw}'");
                return 1;
            }
        },
        Err(std::env::VarError::NotPresent) => {}
        Err(e) => {
            eprintln!("error: reading XFERBO_SEED: {e}");
            return 1;
        }
    }
    if let Some(out) = out {
        config.out = out;
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e:#}");
        return 1;
    }

    match runner::run_experiment(&config, jobs) {
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
        Ok(report) => {
            let failed =
                report.outcomes.iter().filter(|o| matches!(o.status, RunStatus::Failed(_))).count();
            let total = report.outcomes.len();
            println!(
                "{} of {total} runs completed; results in {}",
                total - failed,
                config.out.display()
            );
            if report.any_failed {
                2
            } else {
                0
            }
        }
    }
}

fn cmd_summarize(dir: &PathBuf) -> i32 {
    match summary::summarize_dir(dir) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn cmd_list_cases() -> i32 {
    for name in xferbo::all_cases() {
        let case = xferbo::benchmark_case(name).expect("listed cases exist");
        println!(
            "{name}: {} variables, {} constraints, {} sources; defaults: {} initial points, {} iterations, {} runs",
            case.target.dim(),
            case.target.constraints.len(),
            case.sources.len(),
            case.defaults.initial_doe_size,
            case.defaults.iterations,
            case.defaults.runs
        );
    }
    0
}
