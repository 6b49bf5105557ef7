use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use hom_cascade::cli::{error_json, exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim(), 2));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            let kind = match code {
                2 => "invalid_config",
                3 => "numerical",
                _ => "io",
            };
            eprintln!("{}", error_json(kind, &e.to_string(), code));
            ExitCode::from(code as u8)
        }
    }
}
