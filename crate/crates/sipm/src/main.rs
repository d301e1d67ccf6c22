use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sipm::Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match sipm::run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
