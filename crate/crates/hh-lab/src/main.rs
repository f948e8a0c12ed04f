use clap::Parser;

fn main() {
    let cli = hh_lab::cli::Cli::parse();
    std::process::exit(hh_lab::cli::run(cli));
}
