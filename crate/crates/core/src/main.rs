use std::process::ExitCode;

fn main() -> ExitCode {
    kneeoa::cli::main_with_args(std::env::args_os())
}
