use clap::Parser;

fn main() {
    let cli = fsde_cli::Cli::parse();
    std::process::exit(fsde_cli::run(cli));
}
