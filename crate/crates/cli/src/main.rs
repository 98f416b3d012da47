use clap::Parser;

fn main() {
    let cli = fairtopk_cli::args::Cli::parse();
    std::process::exit(fairtopk_cli::run(&cli));
}
