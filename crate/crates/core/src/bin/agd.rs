use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use agd::experiment::{
    cmd_compare, cmd_fit, cmd_searchlight, cmd_simulate, load_config, CompareArgs, FitArgs, SearchlightArgs,
    SimulateArgs,
};

#[derive(Parser)]
#[command(name = "agd", version, about = "Supervised clustering of grid-structured features")]
struct Cli {
    /// Worker threads (default: all cores; AGD_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate {
        #[command(flatten)]
        args: SimulateArgs,
        /// JSON file replacing the flags.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit and evaluate one method.
    Fit {
        #[command(flatten)]
        args: FitArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute a searchlight score map.
    Searchlight {
        #[command(flatten)]
        args: SearchlightArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Tabulate run reports with paired t-tests.
    Compare {
        #[command(flatten)]
        args: CompareArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn resolve<T: DeserializeOwned>(args: T, config: Option<PathBuf>) -> agd::Result<T> {
    match config {
        Some(path) => load_config(&path),
        None => Ok(args),
    }
}

fn threads(flag: Option<usize>) -> agd::Result<Option<usize>> {
    match std::env::var("AGD_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| agd::Error::InvalidInput(format!("AGD_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> agd::Result<()> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(agd::Error::InvalidInput("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| agd::Error::InvalidInput(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { args, config } => {
            for path in cmd_simulate(&resolve(args, config)?)? {
                println!("{}", path.display());
            }
        }
        Command::Fit { args, config } => {
            let report = cmd_fit(&resolve(args, config)?)?;
            match (&report.summary, &report.cut) {
                (Some(s), Some(c)) => println!(
                    "{}: mean {:.4} std {:.4} (chosen delta {})",
                    report.label, s.mean, s.std, c.chosen_delta
                ),
                (Some(s), None) => println!("{}: mean {:.4} std {:.4}", report.label, s.mean, s.std),
                _ => println!("{}: done", report.label),
            }
        }
        Command::Searchlight { args, config } => {
            let run = cmd_searchlight(&resolve(args, config)?)?;
            println!(
                "max score {:.4} at feature {} ({} missing)",
                run.result.max_score,
                run.result.best_feature,
                run.result.missing.len()
            );
        }
        Command::Compare { args, config } => {
            print!("{}", cmd_compare(&resolve(args, config)?)?.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
