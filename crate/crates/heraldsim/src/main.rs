use clap::Parser;

fn main() {
    let cli = heraldsim::cli::Cli::parse();
    if let Err(error) = heraldsim::cli::run(&cli) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
