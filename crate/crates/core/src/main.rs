use clap::Parser;

fn main() {
    let cli = subpar::cli::Cli::parse();
    std::process::exit(subpar::cli::run(cli));
}
