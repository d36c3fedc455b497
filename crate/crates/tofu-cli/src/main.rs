use clap::Parser;
use tofu_cli::args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = tofu_cli::init_threads().and_then(|()| match &cli.command {
        Command::Simulate(args) => tofu_cli::simulate::run(args),
        Command::Reconstruct(args) => tofu_cli::reconstruct::run(args),
        Command::Train(args) => tofu_cli::train::run(args),
        Command::Eval(args) => tofu_cli::evaluate::run(args),
        Command::Infer(args) => tofu_cli::infer::run(args),
    });
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
