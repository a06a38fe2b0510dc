use std::io::Write;
use std::process::ExitCode;

use adhist_cli::{run, Args, RunConfig};
use anyhow::{Context, Result};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cfg = RunConfig::from_args(Args::parse())?;
    log::info!("running {:?} with {:?}", cfg.mode, cfg.workers);
    let output = run(&cfg)?;

    if cfg.pattern_dump {
        if let Some(p) = &output.pattern {
            eprint!("{}", p.dump());
        }
    }
    match &cfg.out {
        Some(path) => std::fs::write(path, &output.csv)
            .with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(output.csv.as_bytes())?,
    }
    for check in &output.checks {
        eprintln!("{check}");
    }
    Ok(!output.failed())
}
