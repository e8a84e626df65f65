use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use symctl::io::write_atomic;
use symctl_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli).and_then(|record| {
        let json = record.to_json();
        match &cli.record {
            Some(path) => write_atomic(path, json.as_bytes()).map_err(Into::into),
            None => std::io::stdout().write_all(json.as_bytes()).map_err(Into::into),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
