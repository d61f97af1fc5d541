use std::process::ExitCode;

fn main() -> ExitCode {
    facefit::cli::main_with_args(std::env::args_os())
}
