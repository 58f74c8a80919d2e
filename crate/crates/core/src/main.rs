use std::process::ExitCode;

fn main() -> ExitCode {
    neuromech::cli::main_with_args(std::env::args_os())
}
