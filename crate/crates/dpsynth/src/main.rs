use clap::Parser;

fn main() {
    let cli = dpsynth::cli::Cli::parse();
    if let Err(err) = dpsynth::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
