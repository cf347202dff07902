use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use hybrid_rl_cli::cache::EnvCache;
use hybrid_rl_cli::compare::{compare, render};
use hybrid_rl_cli::output::{read_summary, summarize, write_outputs};
use hybrid_rl_cli::{load_config, run_suite, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "hybrid-rl", version, about = "Hybrid offline/online RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a config and write curves.csv, summary.json
    /// and config.resolved.json.
    Run {
        config: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it and print the resolved defaults.
    Validate { config: PathBuf },
    /// Ratio and ordering tables across summary files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        summaries: Vec<PathBuf>,
    },
}

/// Exit status when runs finished but an invariant check failed.
const INVARIANT_FAILURE: u8 = 2;

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    load_config(path).map_err(|e| CliError::Config { path: path.to_path_buf(), error: e })
}

fn run(config_path: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> Result<ExitCode, CliError> {
    let config = load(config_path)?;
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let dir = out.unwrap_or_else(|| config.output_dir.clone());
    let started = Instant::now();
    let suite = run_suite(&config, jobs, &EnvCache::from_env())?;
    let summary = summarize(&config, &suite);
    write_outputs(&dir, &config, &suite, &summary)?;
    eprintln!("wrote {} in {:.1}s", dir.display(), started.elapsed().as_secs_f64());
    for e in summary.experiments.iter().filter(|e| !e.passed) {
        eprintln!(
            "invariant failure in {}: {} eluder violations, coverage {}",
            e.id,
            e.eluder_violations,
            e.coverage_rate.map_or_else(|| "n/a".into(), |r| format!("{r:.3}"))
        );
    }
    Ok(if summary.passed { ExitCode::SUCCESS } else { ExitCode::from(INVARIANT_FAILURE) })
}

fn validate(config_path: &Path) -> Result<ExitCode, CliError> {
    let config = load(config_path)?;
    let lambda = config.oracle.lambda.map_or_else(|| "n/a (tabular oracle)".to_string(), |l| l.to_string());
    emit(&format!(
        "ok\n{}\nbeta: {}\nlambda: {lambda}\n",
        serde_json::to_string_pretty(&config).expect("config serializes"),
        config.beta_description()
    ));
    Ok(ExitCode::SUCCESS)
}

fn compare_files(paths: &[PathBuf]) -> Result<ExitCode, CliError> {
    let summaries = paths.iter().map(|p| read_summary(p)).collect::<Result<Vec<_>, _>>()?;
    let table = compare(&summaries)?;
    let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    emit(&render(&table, &names));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, jobs, out } => run(config, *jobs, out.clone()),
        Command::Validate { config } => validate(config),
        Command::Compare { summaries } => compare_files(summaries),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
