use clap::Parser;
use cstar_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let outcome = execute(&cli);
    match &cli.options.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, outcome.output + "\n") {
                eprintln!("cannot write {}: {e}", path.display());
                std::process::exit(cstar_cli::EXIT_SCHEMA);
            }
        }
        None => println!("{}", outcome.output),
    }
    std::process::exit(outcome.exit_code);
}
