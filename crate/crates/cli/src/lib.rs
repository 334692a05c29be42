//! Command-line front end for `nopa-core`: parses experiment configs and
//! emits CSV/JSON tables.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
mod error;
pub mod output;

pub use error::{CliError, Result, EXIT_OK, EXIT_UNSTABLE, EXIT_USAGE, EXIT_VERIFY};

use commands::{CommandOutput, Options};
use config::{ExperimentConfig, Format, Preset};

#[derive(Debug, Parser)]
#[command(
    name = "nopa",
    version,
    about = "Coherent-feedback NOPA network analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output file (default: stdout).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<Format>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true)]
    pub trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hurwitz verdict and spectrum of the closed-loop drift matrix.
    Stability,
    /// Two-mode squeezing spectrum over the config's frequency grid.
    Spectrum,
    /// Closed-form optimal squeezing of the lossless CFB chain.
    Theorem,
    /// Optimal squeezing across chain lengths at equal total pump power.
    Compare {
        /// x10-0.078 or x10-0.13.
        #[arg(long)]
        preset: Option<Preset>,
    },
    /// Randomized property suites.
    Verify {
        /// Perturb the sampled unitaries to exercise the failure path.
        #[arg(long)]
        inject_fault: bool,
        /// Re-check failures from a record or report file.
        #[arg(long, value_name = "PATH")]
        replay: Option<PathBuf>,
    },
}

pub fn execute(cli: &Cli) -> Result<CommandOutput> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let needs_config = matches!(
        cli.command,
        Command::Stability | Command::Spectrum | Command::Theorem
    );
    if needs_config && cli.config.is_none() {
        return Err(CliError::Usage("--config <path> is required".into()));
    }
    let mut opts = Options {
        format: cli.format,
        seed: cli.seed,
        trials: cli.trials,
        ..Options::default()
    };
    match &cli.command {
        Command::Compare { preset } => opts.preset = *preset,
        Command::Verify {
            inject_fault,
            replay,
        } => {
            opts.inject_fault = *inject_fault;
            opts.replay = replay.clone();
        }
        _ => {}
    }
    if cli.out.is_some() {
        cfg.output.get_or_insert_with(Default::default).path = cli.out.clone();
    }
    match cli.command {
        Command::Stability => commands::stability(&cfg, &opts),
        Command::Spectrum => commands::spectrum(&cfg, &opts),
        Command::Theorem => commands::theorem(&cfg, &opts),
        Command::Compare { .. } => commands::compare(&cfg, &opts),
        Command::Verify { .. } => commands::verify(&cfg, &opts),
    }
    .and_then(|out| {
        let path = cfg.output.as_ref().and_then(|o| o.path.clone());
        if let Some(path) = path {
            std::fs::write(&path, &out.text).map_err(|e| CliError::Io { path, source: e })?;
            Ok(CommandOutput {
                text: String::new(),
                ..out
            })
        } else {
            Ok(out)
        }
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            if stdout.write_all(out.text.as_bytes()).is_err() {
                return EXIT_USAGE;
            }
            for note in &out.notes {
                let _ = writeln!(stderr, "nopa: {note}");
            }
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "nopa: {e}");
            e.exit_code()
        }
    }
}
