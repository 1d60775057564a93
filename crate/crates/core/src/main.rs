use std::process::ExitCode;

use clap::Parser;

use amipdg::cli::{describe, run, Cli, RunConfig};

fn main() -> ExitCode {
    if let Some(n) = std::env::var("AMIPDG_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let result = RunConfig::resolve(Cli::parse()).and_then(|config| {
        let summary = run(&config)?;
        for line in describe(&summary) {
            println!("{line}");
        }
        println!("outputs written to {}", config.out.display());
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
