use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use exomix::experiment::{self, catalog, CATALOG};

/// Thread cap for replicate parallelism.
const THREADS_ENV: &str = "EXOMIX_THREADS";

#[derive(Parser)]
#[command(
    name = "exomix",
    version,
    about = "Run coupling and mixing-bound experiments from TOML configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config; exits 0 iff every verdict passes.
    Run {
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in acceptance experiments.
    List,
    /// Show one catalog entry and its default config.
    Describe { experiment: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    match cli.command {
        Command::List => {
            for e in CATALOG {
                println!(
                    "{:<24} {:>3}  ~{:>5.0}s  {}",
                    e.id, e.criterion, e.expected_runtime_s, e.title
                );
            }
            ExitCode::SUCCESS
        }
        Command::Describe { experiment } => match catalog::find(&experiment) {
            Some(e) => {
                println!("{} (criterion {}, kind {})", e.id, e.criterion, e.kind());
                println!("{}", e.title);
                println!("expected runtime: ~{}s\n", e.expected_runtime_s);
                println!("{}\n", e.description);
                print!("{}", e.config);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: {}", experiment::RunError::UnknownExperiment(experiment));
                ExitCode::from(2)
            }
        },
        Command::Run { config, out } => match experiment::run_file(&config, out.as_deref()) {
            Ok(report) => {
                for v in &report.verdicts {
                    println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.metric, v.detail);
                }
                println!("artifacts in {} ({:.1}s)", report.output_dir, report.wall_clock_seconds);
                if report.all_passed {
                    ExitCode::SUCCESS
                } else {
                    let failed: Vec<&str> = report.failed().map(|v| v.metric.as_str()).collect();
                    eprintln!("failed: {}", failed.join(", "));
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
