use clap::Parser;
use tree_entropy_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    std::process::exit(tree_entropy_cli::commands::run(&cli));
}
