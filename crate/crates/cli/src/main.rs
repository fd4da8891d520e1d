use clap::Parser;

fn main() {
    std::process::exit(orbit_cli::main_with(orbit_cli::Cli::parse()));
}
