mod args;
mod commands;
mod manifest;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use tetot_core::TetotError;

use args::Cli;

fn exit_code(err: &TetotError) -> u8 {
    match err {
        TetotError::Format(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let out = cli.out.clone();
    let result = commands::run(cli.command).and_then(|record| {
        let json = serde_json::to_string_pretty(&record).expect("record serializes") + "\n";
        match &out {
            Some(path) => fs::write(path, json)?,
            None => std::io::stdout().write_all(json.as_bytes())?,
        }
        Ok(record)
    });
    match result {
        Ok(record) => {
            eprint!("{}", commands::summary(&record));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
