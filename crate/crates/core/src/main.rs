use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let outcome = match pde::cli::run_from_args(std::env::args_os()) {
        Ok(o) => o,
        Err(e) => e.exit(),
    };
    let text = serde_json::to_string_pretty(&outcome.stdout).expect("serializable");
    // a closed pipe on stdout is not worth a panic
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    ExitCode::from(outcome.code as u8)
}
