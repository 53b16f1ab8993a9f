use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GUARDIAN_LOG", "warn")).init();
    ExitCode::from(guardian_cli::run(std::env::args_os()))
}
