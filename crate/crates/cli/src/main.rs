use clap::Parser;

fn main() {
    std::process::exit(stokes_hvi::run(stokes_hvi::Cli::parse()));
}
