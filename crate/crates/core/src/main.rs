use std::error::Error as _;
use std::process::ExitCode;

use clap::Parser;
use tokbrier::cli::{run, Cli};

fn main() -> ExitCode {
    // clap exits with 2 on usage errors; 2 is reserved for failed
    // verification, so usage errors are reported as 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(1)
        }
    }
}
