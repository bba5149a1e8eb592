use clap::Parser;

use dualsim::cli::{self, Cli, EXIT_INVALID_INPUT};

fn main() {
    let args = Cli::parse();
    let code = match cli::run(args) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID_INPUT
        }
    };
    std::process::exit(code);
}
