use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match oodlens::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for line in oodlens::cli::diagnostics(&e) {
                eprintln!("error: {line}");
            }
            ExitCode::FAILURE
        }
    }
}
