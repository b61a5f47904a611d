//! Command-line and HTTP front ends for `relief-core`.

pub mod commands;
pub mod server;

use std::net::SocketAddr;

use commands::{Cli, Command};
use relief_core::pipeline::{load_config, run_pipeline, PipelineError};

/// Runs a parsed command line and returns the process exit code:
/// 0 on success, 2 for invalid input, 3 for failures while running.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Serve(args) => {
            let addr = SocketAddr::new(args.host, args.port);
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 3;
                }
            };
            return match runtime.block_on(server::serve(addr, args.state_dir.clone())) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    3
                }
            };
        }
        Command::Run { config } => load_config(config).and_then(|(config, base)| run_pipeline(&config, &base)),
        command => {
            let config = command.to_config().expect("single-stage command");
            run_pipeline(&config, std::path::Path::new(""))
        }
    };
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            report_source(&e);
            e.exit_code()
        }
    }
}

fn report_source(e: &PipelineError) {
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        log::debug!("caused by: {s}");
        source = s.source();
    }
}
