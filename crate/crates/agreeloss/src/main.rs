use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AGREELOSS_LOG", "warn")).init();
    let cli = agreeloss::cli::Cli::parse();
    std::process::exit(agreeloss::cli::run(cli));
}
