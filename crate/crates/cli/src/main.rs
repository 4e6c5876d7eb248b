use clap::Parser;

fn main() {
    let cli = poselift_cli::Cli::parse();
    if let Err(e) = poselift_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(poselift_cli::exit_code(&e));
    }
}
