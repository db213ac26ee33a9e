use clap::Parser;

fn main() {
    let cli = adhint::commands::Cli::parse();
    if let Err(e) = adhint::commands::run(cli) {
        eprintln!("adhint: {e}");
        std::process::exit(e.exit_code());
    }
}
