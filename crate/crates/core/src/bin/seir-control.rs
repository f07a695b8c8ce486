use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use seir_control::cli::{self, Cli, Outcome};

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = cli
        .resolve_config(std::env::vars())
        .context("resolving configuration")?;
    let outcome = cli.execute(&cfg)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            if !outcome.converged {
                eprintln!("error: solver did not converge");
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<seir_control::Error>()
                .map(cli::exit_code)
                .unwrap_or(1);
            ExitCode::from(code)
        }
    }
}
