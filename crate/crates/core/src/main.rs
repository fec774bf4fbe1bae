use std::process::ExitCode;

use clap::Parser;
use fermi_rpa::cli::{diagnostic, exit_code, run, Args, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = RunConfig::resolve(&args).and_then(|cfg| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| fermi_rpa::Error::Config(format!("thread pool: {e}")))?;
        run(&cfg)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
