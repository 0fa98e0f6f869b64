mod config;
mod error;
mod experiments;
mod output;

use clap::{Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Large deviation experiments for quantum spin chains.
#[derive(Parser)]
#[command(name = "spinldp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run { config: PathBuf },
    /// Check a configuration file and its inputs without running it.
    Validate { config: PathBuf },
    /// Print the JSON schema of configuration files.
    Schema,
}

fn run(config: &std::path::Path) -> Result<(), CliError> {
    let loaded = config::load(config)?;
    let mut out = output::Output::create(&loaded.config.output_dir)?;
    out.text("manifest.toml", &config::manifest_text(&loaded.config)?)?;
    let failures = experiments::run(&loaded, &mut out)?;
    println!("wrote {} in {}", out.written().join(", "), out.dir().display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failures.join("; ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run(&config),
        Command::Validate { config } => config::load(&config).map(|l| {
            println!("{}: valid {:?} configuration", config.display(), l.config.experiment);
        }),
        Command::Schema => {
            let schema = schemars::schema_for!(config::RunConfig);
            match serde_json::to_string_pretty(&schema) {
                Ok(s) => {
                    println!("{s}");
                    Ok(())
                }
                Err(e) => Err(CliError::Io(e.to_string())),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
