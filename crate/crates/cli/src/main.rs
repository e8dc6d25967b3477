use std::process::ExitCode;

fn main() -> ExitCode {
    isocal_cli::run(std::env::args_os())
}
