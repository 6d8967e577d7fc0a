use std::process::ExitCode;

use clap::Parser;
use fgw_cli::commands::{run, Cli};

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fgwpred: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
