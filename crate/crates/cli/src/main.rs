use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let out = mcdm_cli::run(std::env::args_os());
    if let Some(config) = out.serve {
        let rt = match tokio::runtime::Runtime::new() {
            Ok(rt) => rt,
            Err(e) => {
                eprintln!("error: cannot start runtime: {e}");
                return ExitCode::from(1);
            }
        };
        return match rt.block_on(mcdm_service::serve(config)) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().lock().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
