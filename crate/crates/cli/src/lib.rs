//! Command-line front end: seeded instance generators, pipeline runners and
//! the invariant suite, all speaking the versioned JSON document format.

pub mod commands;
pub mod config;
pub mod document;
pub mod report;
pub mod suite;

use std::io::Read;
use std::time::Instant;

pub use config::{Cli, Command, GenKind, Options, RunCommand, RunConfig};
pub use document::{Document, Instance};
pub use report::{Failure, Report, Status, EXIT_BREAKDOWN, EXIT_PASS, EXIT_SCHEMA, EXIT_VERDICT};

/// Output text and process exit code for a parsed command line.
#[derive(Debug)]
pub struct Outcome {
    pub output: String,
    pub exit_code: i32,
}

fn schema_error(message: String) -> Outcome {
    Outcome {
        output: serde_json::json!({ "schema": cstar_core::SCHEMA, "error": message }).to_string(),
        exit_code: EXIT_SCHEMA,
    }
}

fn read_input(options: &Options) -> Result<Option<String>, String> {
    let Some(path) = &options.input else {
        return Ok(None);
    };
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map_err(|e| e.to_string())?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(Some(text))
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("documents serialize")
}

pub fn execute(cli: &Cli) -> Outcome {
    let config = match RunConfig::from_options(&cli.options) {
        Ok(c) => c,
        Err(e) => return schema_error(e),
    };
    match &cli.command {
        Command::Gen { kind } => Outcome {
            output: pretty(&document::generate(&config, *kind)),
            exit_code: EXIT_PASS,
        },
        Command::Run { command: RunCommand::Suite } => {
            let report = suite::run_suite(&config);
            Outcome {
                exit_code: report.exit_code(),
                output: pretty(&report),
            }
        }
        Command::Run { command } => {
            let instance = match read_input(&cli.options) {
                Err(e) => return schema_error(e),
                Ok(Some(text)) => match Document::parse(&text) {
                    Ok(doc) => Ok(doc.instance),
                    Err(f) => return schema_error(f.message().to_string()),
                },
                Ok(None) => commands::default_instance(*command, &config),
            };
            let mut trial = report::Trial::default();
            let start = Instant::now();
            let outcome = instance.and_then(|inst| commands::run(*command, &inst, &config, &mut trial));
            let result = trial.finish(format!("{}-0000", command.name()), outcome, start.elapsed().as_secs_f64());
            let report = Report::new(command.name(), &config, vec![result]);
            Outcome {
                exit_code: report.exit_code(),
                output: pretty(&report),
            }
        }
    }
}
