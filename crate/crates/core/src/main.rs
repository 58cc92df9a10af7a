use std::process::ExitCode;

use clap::Parser;

use capflp::cli::{run, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                // --help / --version
                ExitCode::SUCCESS
            };
        }
    };

    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("CAPFLP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    ExitCode::from(run(&cli))
}
