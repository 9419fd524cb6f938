use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(jcmspl::cli::run(std::env::args_os()))
}
