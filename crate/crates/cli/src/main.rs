use clap::Parser;
use kwc_cli::{dispatch, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(dispatch(&cli));
}
