use clap::Parser;

use proofloop_cli::commands::CliError;
use proofloop_cli::{error_report, execute, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let report = match Cli::try_parse() {
        Ok(cli) => execute(&cli.command).unwrap_or_else(|e| {
            log::error!("{e}");
            error_report(cli.command.name(), &e)
        }),
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            e.exit();
        }
        Err(e) => {
            let _ = e.print();
            error_report("usage", &CliError::Input(e.kind().to_string()))
        }
    };
    println!("{}", report.summary);
    std::process::exit(report.code);
}
