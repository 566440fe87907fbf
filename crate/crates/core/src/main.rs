use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mflms::cli::main_with(std::env::args_os()))
}
