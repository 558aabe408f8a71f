use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use secscat_cli::config::Format;
use secscat_cli::report::{REPORT_FILE, RESULTS_FILE};
use secscat_cli::{run, schema, validate_config, CliError, ScenarioConfig, OUT_ENV};

#[derive(Parser, Debug)]
#[command(name = "secscat", version, about = "Secondary scattering operator scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write report.json, results.csv and curves.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $SECSCAT_OUT, then ./secscat-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// What to echo on stdout.
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check a scenario file and list every problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the JSON Schema of scenario files.
    Schema,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("secscat-out"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, format, seed, tol } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = tol {
                cfg.tol = Some(t);
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            let dir = out_dir(out);
            let (report, curves) = run(&cfg)?;
            report.write(&curves, &dir)?;
            let echoed = match cfg.format {
                Format::Csv => RESULTS_FILE,
                Format::Json => REPORT_FILE,
            };
            let text = std::fs::read_to_string(dir.join(echoed)).map_err(|e| CliError::Io(e.to_string()))?;
            print!("{text}");
            Ok(())
        }
        Command::Validate { config } => {
            let findings = validate_config(&config)?;
            if findings.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(CliError::Validation(findings))
            }
        }
        Command::Schema => {
            println!("{:#}", schema::scenario_schema());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("secscat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
