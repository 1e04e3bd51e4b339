use clap::Parser;

fn main() {
    let cli = pwreg_cli::cli::Cli::parse();
    std::process::exit(pwreg_cli::run(cli));
}
