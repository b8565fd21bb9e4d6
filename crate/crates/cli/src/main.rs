#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, OutputArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent flags; exit 1.
    Usage(String),
    /// Unreadable input or a failed computation; exit 2.
    Data(String),
}

fn write(output: &OutputArgs, tables: &[report::Table]) -> Result<(), CliError> {
    let text = report::render(tables, output.out_format).map_err(CliError::Data)?;
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Summarize(a) => write(&a.output, &commands::summarize(a)?),
        Command::Plan(a) => write(&a.output, &commands::plan_cmd(a)?),
        Command::Choose(a) => write(&a.output, &commands::choose(a)?),
        Command::Stratify(a) => write(&a.output, &commands::stratify(a)?),
        Command::Simulate(a) => write(&a.output, &commands::simulate(a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
