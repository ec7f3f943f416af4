use std::process::ExitCode;

fn main() -> ExitCode {
    fairalloc::cli::main_with_args(std::env::args_os())
}
