//! Command-line front end: problem files in, `stabilis-report/1` JSON out.

pub mod commands;
mod error;
pub mod input;
pub mod report;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::Cli;
pub use error::CliError;
pub use input::{canonical_json, parse_problem_file, parse_problem_str, problem_digest, ProblemFile};
pub use report::{RunReport, SCHEMA};

/// Parses `args`, runs the command, writes the report and returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let mut report = commands::run(&cli);
    let json = report.to_json();
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                let err = CliError::Io { path: path.display().to_string(), source: e };
                eprintln!("{err}");
                report.exit_code = err.exit_code();
            }
        }
        None => println!("{json}"),
    }
    eprintln!("{}", report.summary());
    report.exit_code
}
