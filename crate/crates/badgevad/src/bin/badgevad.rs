use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(badgevad::cli::run(std::env::args()) as u8)
}
