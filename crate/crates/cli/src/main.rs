use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use monge_mixed_cli::{run_solve, run_study, run_verify, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "monge-mixed", version, about = "Mixed finite element solver for the Monge-Ampere equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; overrides `output.threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve on the finest configured level.
    Solve,
    /// Run a convergence study over all configured levels.
    Study,
    /// Run the built-in invariant checks.
    Verify,
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(t) = cli.threads {
        config.output.threads = t;
    }
    config.validate()?;
    let out = cli.out.clone().unwrap_or_else(|| config.output.dir.clone());
    Ok((config, out))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Verify => run_verify(&mut stdout),
        Command::Solve => {
            let (config, out) = load(cli)?;
            run_solve(&config, &out, &mut stdout)
        }
        Command::Study => {
            let (config, out) = load(cli)?;
            run_study(&config, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format(|buf, record| {
            use std::io::Write;
            writeln!(
                buf,
                "{}",
                serde_json::json!({
                    "level": record.level().as_str(),
                    "target": record.target(),
                    "message": record.args().to_string(),
                })
            )
        })
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
