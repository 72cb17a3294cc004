use clap::Parser;

fn main() {
    std::process::exit(ioncascade_cli::main_with(ioncascade_cli::Cli::parse()));
}
