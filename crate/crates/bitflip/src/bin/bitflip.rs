//! Thin command-line entry point: subcommand + JSON config path, with an
//! optional output override. All experiment structure lives in the config.

use std::process::ExitCode;

use bitflip::cli::{self, Command};
use bitflip::error::Error;

const USAGE: &str = "\
bitflip — simulation and analysis of the BF/DB bit-flipping chains

Usage:
  bitflip <command> <config.json> [--output <path>]
  bitflip --help

Commands:
  simulate      return-time samples -> CSV (replica_id,tau,censored,m0,peak_m)
  snapshot      continuous-time snapshot counts -> CSV (replica_id,n_active,n_damaged)
  analyze       active-count series and occupancy integral -> JSON
  classify      recurrence/transience verdicts for both models -> JSON
  moments       fractional-moment exponent curve over a p grid -> CSV (p,r_lower,r_upper)
  clt           standardized active-count normality check -> JSON
  couple-audit  domination and return-time ordering audits -> JSON

The config is a JSON document (see README). Its \"command\" field must
match the subcommand. Output goes to --output, the config's \"output\"
path, or stdout. Exit codes: 0 success, 1 runtime failure, 2 config error.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    if args.len() < 2 {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    }

    let Some(command) = Command::from_name(&args[0]) else {
        eprintln!("error: unknown command `{}`\n\n{USAGE}", args[0]);
        return ExitCode::from(2);
    };
    let config_path = &args[1];
    let mut output: Option<String> = None;
    let mut rest = args[2..].iter();
    while let Some(arg) = rest.next() {
        match arg.as_str() {
            "--output" | "-o" => match rest.next() {
                Some(path) => output = Some(path.clone()),
                None => {
                    eprintln!("error: --output needs a path");
                    return ExitCode::from(2);
                }
            },
            other => {
                eprintln!("error: unexpected argument `{other}`\n\n{USAGE}");
                return ExitCode::from(2);
            }
        }
    }

    let text = match std::fs::read_to_string(config_path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read `{config_path}`: {e}");
            return ExitCode::from(1);
        }
    };
    let config = match cli::parse_config(&text) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if config.command != command {
        eprintln!(
            "error: config error at `command`: config says `{}` but the `{command}` subcommand was invoked",
            config.command
        );
        return ExitCode::from(2);
    }

    match cli::execute(&config, output.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
