use std::process::ExitCode;

use clap::Parser;
use ssi_cli::app::{error_kind, error_line, exit_code, render_text, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&message);
            eprintln!("{}", error_line("usage", first.trim_start_matches("error: ")));
            return ExitCode::from(exit_code("usage") as u8);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(summary) => {
            if json {
                println!("{}", serde_json::Value::Object(summary));
            } else {
                print!("{}", render_text(&summary));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = error_kind(&e);
            eprintln!("{}", error_line(kind, &format!("{e:#}")));
            ExitCode::from(exit_code(kind) as u8)
        }
    }
}
