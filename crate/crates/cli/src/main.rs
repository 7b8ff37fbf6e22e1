mod args;
mod job;
mod output;
mod spec;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Format};
use job::{CliError, Job};
use output::{emit_csv, Envelope, Timing};

/// Caps the rayon pool at COHINFO_THREADS workers when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("COHINFO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("COHINFO_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))
}

fn write_output(path: Option<&str>, text: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{p}: {e}"))),
        None => std::io::stdout()
            .write_all(text)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<Option<String>, CliError> {
    configure_threads()?;
    let start = Instant::now();
    let job = Job::from_command(&cli.command, cli.common.seed)?;
    if cli.common.format == Format::Csv && !job.has_curve() {
        return Err(CliError::Usage(format!(
            "`{}` with these options produces no curve; CSV output needs one",
            cli.command.name()
        )));
    }
    let outcome = job.run()?;
    let config = serde_json::json!({
        "common": cli.common,
        "args": serde_json::to_value(&cli.command)
            .ok()
            .and_then(|v| v.as_object().and_then(|m| m.values().next().cloned())),
    });
    let envelope = Envelope {
        command: cli.command.name().to_string(),
        config,
        scalars: outcome.scalars,
        curve: outcome.curve,
        uncertainty: outcome.uncertainty,
        version: cohinfo_core::VERSION.to_string(),
        seed: cli.common.seed,
        timing: Timing {
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    };
    match cli.common.format {
        Format::Json => write_output(cli.common.output.as_deref(), envelope.to_json().as_bytes())?,
        Format::Csv => {
            let mut buf = Vec::new();
            emit_csv(&envelope.curve, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            write_output(cli.common.output.as_deref(), &buf)?;
        }
    }
    Ok(outcome.failure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            eprintln!("error: {failure}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
