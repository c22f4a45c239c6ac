use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use oldphoto::degrade::{build_dataset, Manifest, MANIFEST_FILE};
use oldphoto::eval::{aggregate_ballots, corpus_eval, BallotSet};
use oldphoto::pipeline::{run_auto_session, write_transcript, PresetCatalog};
use oldphoto::{BackendRegistry, DegradationRecipe, Error, ImageBuffer, MaskBuffer, PipelinePreset, Stage, StageRunner};
use oldphoto_service::ServiceConfig;

use crate::PipelineArgs;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.root() {
                Error::Io { .. } | Error::Codec(_) | Error::Input(_) => 2,
                Error::BackendFailure { .. } | Error::Protocol(_) | Error::Timeout { .. } => 3,
                _ => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => {
                write!(f, "{e}")?;
                if let Error::BackendFailure { diagnostics, .. } = e.root() {
                    if !diagnostics.is_empty() {
                        write!(f, "\n--- backend output ---\n{diagnostics}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

pub fn degrade(
    src: &Path,
    out: &Path,
    recipe: Option<&Path>,
    count: usize,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> Result<()> {
    set_jobs(jobs)?;
    let mut recipe = match recipe {
        Some(path) => DegradationRecipe::load(path)?,
        None => DegradationRecipe::default(),
    };
    if let Some(seed) = seed {
        recipe.seed = seed;
    }
    let manifest = build_dataset(src, out, &recipe, count)?;
    tracing::info!(records = manifest.records.len(), "dataset written");
    println!("{}", out.join(MANIFEST_FILE).display());
    Ok(())
}

struct Pipeline {
    preset: PipelinePreset,
    runner: StageRunner,
}

fn pipeline(args: &PipelineArgs) -> Result<Pipeline> {
    let catalog = match &args.presets {
        Some(p) => PresetCatalog::load(p)?,
        None => PresetCatalog::builtin(),
    };
    let mut preset = catalog.get(&args.preset)?.clone();
    for assignment in &args.overrides {
        preset.apply_override(assignment)?;
    }
    if let Some(seed) = args.seed {
        for stage in Stage::ALL {
            preset.params_mut(stage).seed = seed;
        }
    }
    preset.validate()?;
    let mut registry = BackendRegistry::with_reference_backends();
    if let Some(path) = &args.backends {
        registry.register_file(path)?;
    }
    if !(args.timeout.is_finite() && args.timeout > 0.0) {
        return Err(CliError::Usage("--timeout must be positive".into()));
    }
    let runner = StageRunner::new(registry).with_external_timeout(Duration::from_secs_f64(args.timeout));
    Ok(Pipeline { preset, runner })
}

pub fn restore(
    input: &Path,
    mask: Option<&Path>,
    out: &Path,
    transcript: Option<&Path>,
    args: &PipelineArgs,
) -> Result<()> {
    let Pipeline { preset, runner } = pipeline(args)?;
    let img = ImageBuffer::load(input)?;
    let mask = mask.map(MaskBuffer::load).transpose()?;
    tracing::info!(preset = %preset.name, "restoring {}", input.display());
    let session = run_auto_session(&img, &preset, mask.as_ref(), &runner)?;
    session.final_image().expect("all stages committed").save(out)?;
    if let Some(path) = transcript {
        write_transcript(&session, path)?;
        tracing::info!("transcript written to {}", path.display());
    }
    Ok(())
}

pub fn eval(manifest: &Path, pad: u32, out: &Path, jobs: Option<usize>, args: &PipelineArgs) -> Result<()> {
    set_jobs(jobs)?;
    let Pipeline { preset, runner } = pipeline(args)?;
    let manifest = Manifest::load(manifest)?;
    tracing::info!(records = manifest.records.len(), preset = %preset.name, "evaluating");
    let table = corpus_eval(&manifest, &preset, pad, &runner)?;
    table.save(out)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    tracing::info!(
        "mean PSNR {} (degraded {}), mean SSIM {} (degraded {}), {} failed",
        fmt(table.aggregate.psnr),
        fmt(table.aggregate.degraded_psnr),
        fmt(table.aggregate.ssim),
        fmt(table.aggregate.degraded_ssim),
        table.failures()
    );
    Ok(())
}

pub fn ballots(inputs: &[PathBuf], out: &Path) -> Result<()> {
    let mut set = BallotSet::new();
    for path in inputs {
        set.extend(BallotSet::load(path)?)?;
    }
    let reports = aggregate_ballots(&set)?;
    let text = if out.extension().is_some_and(|e| e == "json") {
        serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n"
    } else {
        reports.iter().map(|r| format!("{r}\n")).collect()
    };
    std::fs::write(out, text).map_err(|e| io_error(out, e))?;
    for r in &reports {
        tracing::info!("{r}");
    }
    Ok(())
}

pub fn serve(
    addr: SocketAddr,
    sessions: PathBuf,
    backends: Option<PathBuf>,
    presets: Option<PathBuf>,
    timeout: f64,
    max_age_hours: f64,
) -> Result<()> {
    if !(timeout.is_finite() && timeout > 0.0 && max_age_hours.is_finite() && max_age_hours > 0.0) {
        return Err(CliError::Usage("--timeout and --max-age-hours must be positive".into()));
    }
    let mut config = ServiceConfig::new(sessions);
    config.backends_file = backends;
    config.presets_file = presets;
    config.external_timeout = Duration::from_secs_f64(timeout);
    config.session_max_age = Duration::from_secs_f64(max_age_hours * 3600.0);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| io_error(Path::new("."), e))?;
    runtime
        .block_on(oldphoto_service::serve(config, addr))
        .map_err(|e| io_error(Path::new(&addr.to_string()), e))
}
