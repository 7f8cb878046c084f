//! Batch front-end: load a run configuration, execute the sessions, emit
//! reports and transcripts. Exit status is 0 whenever execution completes —
//! an abort verdict is a result, not a failure; only operational problems
//! (bad config, I/O) return nonzero.

use clap::Parser;
use muqkd::config::RunConfig;
use muqkd::run::{render_summary, run, write_report, write_transcript};
use muqkd::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "muqkd", version, about = "Multi-user QKD network simulator")]
struct Args {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Override the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the number of sessions.
    #[arg(long)]
    sessions: Option<u64>,

    /// Write the full round transcript here (JSON lines), overriding the
    /// config's output.transcript.
    #[arg(long)]
    transcript: Option<PathBuf>,

    /// Write the machine-readable report here (JSON), overriding the
    /// config's output.report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::ConfigParse(_) | Error::UnknownNode(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn execute(args: Args) -> Result<(), Error> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(sessions) = args.sessions {
        config.sessions = sessions;
    }
    if let Some(out) = args.out {
        config.output.report = Some(out);
    }
    if let Some(transcript) = args.transcript {
        config.output.transcript = Some(transcript);
    }

    let output = run(&config)?;

    if let Some(path) = &config.output.report {
        write_report(&output, path)?;
    }
    if let Some(path) = &config.output.transcript {
        write_transcript(&output, path)?;
    }

    print!("{}", render_summary(&output));
    Ok(())
}
