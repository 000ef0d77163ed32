mod artifacts;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use crate::artifacts::Artifacts;
use crate::commands::Status;
use crate::config::{Cli, RunConfig};

const EXIT_VALIDATION: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;
const EXIT_NOT_CERTIFIED: u8 = 4;
const EXIT_IO: u8 = 5;

fn exit_code(e: &lgcert::Error) -> u8 {
    match e {
        lgcert::Error::Convergence { .. } => EXIT_CONVERGENCE,
        lgcert::Error::Io(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Reads a config file: either a bare `RunConfig` or a manifest holding one
/// under `config`.
fn load_config(path: &std::path::Path) -> Result<RunConfig, (u8, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn real_main(cli: Cli) -> Result<(), (u8, String)> {
    let config = match (cli.command, &cli.config) {
        (Some(c), None) => c,
        (None, Some(path)) => load_config(path)?,
        (Some(_), Some(_)) => return Err((EXIT_VALIDATION, "give either a subcommand or --config, not both".into())),
        (None, None) => return Err((EXIT_VALIDATION, "no subcommand given (see --help)".into())),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    }
    let io = |e: std::io::Error| (EXIT_IO, format!("{}: {e}", cli.out.display()));
    let mut out = Artifacts::new(&cli.out, &config, commands::seeds(&config)).map_err(io)?;
    let status = commands::execute(&config, &mut out).map_err(|e| (exit_code(&e), e.to_string()))?;
    println!("{} config {} → {}", config.name(), &out.hash()[..12], cli.out.display());
    out.finish().map_err(io)?;
    match status {
        Status::Done => Ok(()),
        Status::NotCertified => Err((EXIT_NOT_CERTIFIED, "run not certified".into())),
    }
}
