use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod manifest;

use config::Loaded;
use error::CliError;

/// Simulate two-drive phase-sensitive magnetometry runs, spectra and audio broadcasts.
///
/// Outputs go to `output_dir` from the config (default `qpsd-out`), or to `$QPSD_OUT_DIR`
/// when set. A run's `manifest.json` can be passed back as CONFIG to repeat it exactly.
#[derive(Parser)]
#[command(name = "qpsd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Photon-count trace and lock-in output for one run.
    Simulate { config: PathBuf },
    /// Filter function magnitude and phase over a frequency sweep.
    Filter { config: PathBuf },
    /// Shot-noise phase noise, field sensitivity and linear dynamic range.
    Sensitivity { config: PathBuf },
    /// Sectioned heterodyne spectrum of the configured signal.
    Analyze { config: PathBuf },
    /// Turn a WAV file into a broadcast waveform.
    AudioEncode { config: PathBuf },
    /// Receive a broadcast WAV through the simulated sensor and reconstruct it.
    AudioDecode { config: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate { .. } => "simulate",
            Self::Filter { .. } => "filter",
            Self::Sensitivity { .. } => "sensitivity",
            Self::Analyze { .. } => "analyze",
            Self::AudioEncode { .. } => "audio-encode",
            Self::AudioDecode { .. } => "audio-decode",
        }
    }

    fn config(&self) -> &PathBuf {
        match self {
            Self::Simulate { config }
            | Self::Filter { config }
            | Self::Sensitivity { config }
            | Self::Analyze { config }
            | Self::AudioEncode { config }
            | Self::AudioDecode { config } => config,
        }
    }
}

fn run(cmd: &Command) -> Result<PathBuf, CliError> {
    let cfg = Loaded::read(cmd.config())?;
    let out = match cmd {
        Command::Simulate { .. } => commands::simulate(&cfg)?,
        Command::Filter { .. } => commands::filter(&cfg)?,
        Command::Sensitivity { .. } => commands::sensitivity_report(&cfg)?,
        Command::Analyze { .. } => commands::analyze(&cfg)?,
        Command::AudioEncode { .. } => commands::audio_encode(&cfg)?,
        Command::AudioDecode { .. } => commands::audio_decode(&cfg)?,
    };
    out.finish(cmd.name(), &cfg.config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(&cli.command)) {
        Ok(Ok(manifest)) => {
            println!("manifest: {}", manifest.display());
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("qpsd {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(CliError::Internal(String::new()).exit_code()),
    }
}
