use clap::Parser;
use hankel_nwidth::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("hnw: one or more checks failed");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("hnw: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
