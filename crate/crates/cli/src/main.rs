use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(causalgrid_cli::run(std::env::args_os()))
}
