//! `oldphoto`: batch front end for the restoration library.
//!
//! Progress goes to stderr; results are written to the files named on the
//! command line. Exit codes: 0 ok, 1 usage, 2 I/O, 3 backend failure.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "oldphoto", version, about = "Staged old-photo restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// Preset name from the built-ins or --presets.
    #[arg(long, default_value = "default")]
    pub preset: String,
    /// JSON array of presets layered over the built-ins.
    #[arg(long, env = "OLDPHOTO_PRESETS")]
    pub presets: Option<PathBuf>,
    /// JSON array of extra backend descriptors.
    #[arg(long, env = "OLDPHOTO_BACKENDS")]
    pub backends: Option<PathBuf>,
    /// Override a preset parameter, e.g. `denoise.strength=0.02` or `colorize.extras.mode=sepia`.
    #[arg(long = "set", value_name = "STAGE.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed passed to every stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Timeout in seconds for external backends.
    #[arg(long, env = "OLDPHOTO_EXTERNAL_TIMEOUT", default_value_t = 300.0)]
    pub timeout: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize degraded tiers and crack masks from clean images.
    Degrade {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Recipe JSON; built-in defaults when omitted.
        #[arg(long)]
        recipe: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Overrides the recipe's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run all four stages on one image.
    Restore {
        #[arg(long)]
        input: PathBuf,
        /// Damage mask (white = damaged). Without it the damage stage is skipped
        /// for backends that need one.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write a replayable transcript (and the stage outputs next to it).
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Restore every record of a degradation manifest and score it.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Dilation radius applied to the ground-truth crack masks.
        #[arg(long, default_value_t = 2)]
        pad: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Tally preference ballots (`participant,question_type,question_id,choice`).
    Ballots {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Report file; JSON when it ends in `.json`, text otherwise.
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "OLDPHOTO_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = "OLDPHOTO_SESSIONS", default_value = "sessions")]
        sessions: PathBuf,
        #[arg(long, env = "OLDPHOTO_BACKENDS")]
        backends: Option<PathBuf>,
        #[arg(long, env = "OLDPHOTO_PRESETS")]
        presets: Option<PathBuf>,
        #[arg(long, env = "OLDPHOTO_EXTERNAL_TIMEOUT", default_value_t = 300.0)]
        timeout: f64,
        /// Sessions idle longer than this many hours are deleted.
        #[arg(long, env = "OLDPHOTO_SESSION_MAX_AGE_HOURS", default_value_t = 24.0)]
        max_age_hours: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();

    let result = match cli.command {
        Command::Degrade {
            src,
            out,
            recipe,
            count,
            seed,
            jobs,
        } => commands::degrade(&src, &out, recipe.as_deref(), count, seed, jobs),
        Command::Restore {
            input,
            mask,
            out,
            transcript,
            pipeline,
        } => commands::restore(&input, mask.as_deref(), &out, transcript.as_deref(), &pipeline),
        Command::Eval {
            manifest,
            pad,
            out,
            jobs,
            pipeline,
        } => commands::eval(&manifest, pad, &out, jobs, &pipeline),
        Command::Ballots { inputs, out } => commands::ballots(&inputs, &out),
        Command::Serve {
            addr,
            sessions,
            backends,
            presets,
            timeout,
            max_age_hours,
        } => commands::serve(addr, sessions, backends, presets, timeout, max_age_hours),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
