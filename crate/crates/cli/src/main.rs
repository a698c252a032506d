//! `mgvi`: command-line driver for simulation, training, upsampling,
//! rendering and evaluation.

mod args;
mod eval;
mod fsutil;
mod render;
mod simulate;
mod svg;
mod train;
mod upsample;

use std::process::ExitCode;

use args::{parse_with_config, Command};

fn main() -> ExitCode {
    let cli = match parse_with_config(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Train(a) => train::run(a),
        Command::Upsample(a) => upsample::run(a),
        Command::Render(a) => render::run(a),
        Command::Eval(a) => eval::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
