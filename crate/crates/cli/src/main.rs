use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nhmc_cli::{exit_codes, run_experiment, ConfigError, RunOptions};
use nhmc_cli::runner::RunError;

/// Batch experiment driver for non-homogeneous Markov chain studies.
///
/// Each subcommand runs one experiment kind; the config file's "kind"
/// field must match. Reports are machine-readable JSON plus CSV series,
/// and reruns with the same config and seed are byte-identical.
#[derive(Parser)]
#[command(name = "nhmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and CSV series.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker-thread cap (NHMC_WORKERS env overrides); outputs never
    /// depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Contraction-coefficient property sweep.
    Coeff(CommonArgs),
    /// Exact decomposition and inequality suite on one instance.
    Decompose(CommonArgs),
    /// Inventory structure certificates.
    Inventory(CommonArgs),
    /// Alternating-subsequence certificates.
    Altsub(CommonArgs),
    /// Condition-ratio trend and normality across horizons.
    Clt(CommonArgs),
    /// Parity cancellation fixture.
    Counterexample(CommonArgs),
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::Coeff(_) => "coeff",
            Command::Decompose(_) => "decompose",
            Command::Inventory(_) => "inventory",
            Command::Altsub(_) => "altsub",
            Command::Clt(_) => "clt",
            Command::Counterexample(_) => "counterexample",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Coeff(a)
            | Command::Decompose(a)
            | Command::Inventory(a)
            | Command::Altsub(a)
            | Command::Clt(a)
            | Command::Counterexample(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();

    let workers = std::env::var("NHMC_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(args.workers);

    let config_text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config.display());
            return ExitCode::from(exit_codes::IO_ERROR as u8);
        }
    };

    // The config kind must match the subcommand.
    let declared = serde_json::from_str::<serde_json::Value>(&config_text)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned));
    if let Some(kind) = &declared {
        if kind != cli.command.kind() {
            eprintln!(
                "error: config kind '{kind}' does not match subcommand '{}'",
                cli.command.kind()
            );
            return ExitCode::from(exit_codes::CONFIG_ERROR as u8);
        }
    }

    let options = RunOptions { out_dir: args.out.clone(), seed: args.seed, workers };
    match run_experiment(&config_text, &options) {
        Ok(outcome) => {
            let pass = outcome.report.all_pass();
            println!(
                "{} [{}] -> {}",
                outcome.report.kind,
                if pass { "PASS" } else { "FAIL" },
                outcome.report_path.display()
            );
            for v in &outcome.report.verdicts {
                println!(
                    "  {} {}: {}",
                    if v.pass { "[pass]" } else { "[FAIL]" },
                    v.name,
                    v.details
                );
            }
            if pass {
                ExitCode::from(exit_codes::SUCCESS as u8)
            } else {
                ExitCode::from(exit_codes::CERTIFICATE_FAILURE as u8)
            }
        }
        Err(RunError::Config(err)) => {
            match &err {
                ConfigError::Json(msg) => eprintln!("config error: {msg}"),
                ConfigError::Invalid(violations) => {
                    eprintln!("config error ({} violations):", violations.len());
                    for v in violations {
                        eprintln!("  - {v}");
                    }
                }
            }
            ExitCode::from(exit_codes::CONFIG_ERROR as u8)
        }
        Err(RunError::Numeric(e)) => {
            eprintln!("numeric failure: {e}");
            ExitCode::from(exit_codes::CERTIFICATE_FAILURE as u8)
        }
        Err(RunError::Io(e)) => {
            eprintln!("io failure: {e}");
            ExitCode::from(exit_codes::IO_ERROR as u8)
        }
    }
}
