use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use teleportal_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    let result = match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    let (value, code) = match result {
        Ok(v) => (v, ExitCode::SUCCESS),
        Err(e) => (e.to_json(), ExitCode::FAILURE),
    };
    let text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    code
}
