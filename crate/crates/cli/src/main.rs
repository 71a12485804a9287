use angloc_cli::{run, Cli, CliError};
use clap::Parser;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version
                e.exit();
            }
            let err = CliError::usage(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            std::process::exit(err.kind().code());
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.kind().code());
    }
}
