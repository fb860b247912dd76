use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use despeckle_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version also land here, with exit code 0.
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(out) => {
            if !out.stderr.is_empty() {
                eprint!("{}", out.stderr);
            }
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", out.stdout);
            match out.failure {
                Some(e) => {
                    eprintln!("despeckle: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("despeckle: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
