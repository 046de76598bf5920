use std::process::ExitCode;

use clap::Parser;
use tipa::cli::{run, Cli};

fn main() -> ExitCode {
    let args = match tipa::config::expand(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => return fail(&e),
    };
    let cli = Cli::parse_from(args);
    match run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &tipa::Error) -> ExitCode {
    eprintln!("error[{}]: {e}", e.code());
    ExitCode::from(e.exit_code() as u8)
}
