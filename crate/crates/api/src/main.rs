use std::process::ExitCode;

use clap::Parser;
use resplan_api::cli::{self, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan {
            scenario,
            constraints,
            horizon,
            node_budget,
            out,
        } => cli::plan(&scenario, constraints.as_deref(), horizon, node_budget).and_then(|text| match out {
            Some(path) => std::fs::write(&path, text).map_err(|e| cli::Failure {
                code: cli::EXIT_INPUT,
                message: format!("{}: {e}", path.display()),
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }),
        Command::Compare { scenario, constraints } => {
            cli::compare_rows(&scenario, constraints.as_deref()).map(|rows| print!("{}", cli::render_table(&rows)))
        }
        Command::Serve { port } => resplan_api::server::serve(port).map_err(|e| cli::Failure {
            code: cli::EXIT_INPUT,
            message: e.to_string(),
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("resplan: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
