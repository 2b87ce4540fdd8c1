use clap::Parser;
use ragcap_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = ragcap_cli::run(&cli, &mut std::io::stdout().lock());
    std::process::exit(code);
}
