use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use radshoot_cli::error::{ErrorReport, EXIT_CONFIG};
use radshoot_cli::{load_config, run, CliError, Command, Format};

/// Degree-theoretic shooting for radial semilinear elliptic systems.
#[derive(Debug, Parser)]
#[command(name = "radshoot", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set experiment.a=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampling seed (overrides `output.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Output formats (overrides `output.format`).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn emit(report: &ErrorReport) {
    eprintln!(
        "{}",
        serde_json::to_string(report).expect("error reports always serialize")
    );
}

fn execute(args: Args) -> Result<i32, CliError> {
    let mut cfg = load_config(&args.config, &args.overrides)?;
    if let Some(out) = args.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(seed) = args.seed {
        cfg.output.seed = seed;
    }
    if let Some(format) = args.format {
        cfg.output.format = format;
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation {
                key: "--threads".into(),
                message: e.to_string(),
            })?;
    }
    let outcome = run(args.command, &cfg)?;
    println!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit(&ErrorReport {
                error: "usage_error",
                message: e.kind().to_string(),
                exit_code: EXIT_CONFIG,
                line: None,
                key: None,
            });
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match execute(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let report = e.report();
            emit(&report);
            ExitCode::from(report.exit_code as u8)
        }
    }
}
