use clap::Parser;
use macpir::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("macpir: {e:#}");
        std::process::exit(e.exit_code());
    }
}
