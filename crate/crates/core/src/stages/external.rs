use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::registry::{BackendDescriptor, BackendImpl};
use super::{Stage, StageParams};
use crate::degrade::MaskBuffer;
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

pub const INPUT_FILE: &str = "input.png";
pub const MASK_FILE: &str = "mask.png";
pub const OUTPUT_FILE: &str = "output.png";
pub const PARAMS_FILE: &str = "params.txt";

const DIAGNOSTIC_TAIL: usize = 4096;
const POLL_INTERVAL: Duration = Duration::from_millis(10);

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

fn unescape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// `key=value` lines, UTF-8. Extras are written as `extras.<key>=value`.
/// Backslash, CR and LF in values are escaped.
pub fn render_params_file(stage: Stage, params: &StageParams) -> String {
    let mut lines = vec![
        format!("stage={stage}"),
        format!("backend_id={}", escape(&params.backend_id)),
        format!("strength={}", params.strength),
        format!("steps={}", params.steps),
        format!("guidance={}", params.guidance),
        format!("prompt={}", escape(&params.prompt)),
        format!("checkpoint={}", escape(&params.checkpoint)),
        format!("upscale={}", params.upscale),
        format!("seed={}", params.seed),
    ];
    for (k, v) in &params.extras {
        lines.push(format!("extras.{}={}", escape(k), escape(v)));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

pub fn parse_params_file(text: &str) -> Result<BTreeMap<String, String>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (unescape(k), unescape(v)))
                .ok_or_else(|| Error::Protocol(format!("params line without `=`: {l}")))
        })
        .collect()
}

fn tail(bytes: &[u8]) -> String {
    let start = bytes.len().saturating_sub(DIAGNOSTIC_TAIL);
    String::from_utf8_lossy(&bytes[start..]).trim_end().to_string()
}

fn spawn_reader(mut src: impl Read + Send + 'static) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = src.read_to_end(&mut buf);
        buf
    })
}

/// Runs one stage through an external program.
///
/// The workdir receives `input.png`, an optional `mask.png` and `params.txt`;
/// the program must write `output.png` and exit 0. Output must measure the
/// input size times `params.upscale`, and be RGB for the colorize stage.
pub fn run_external_backend(
    descriptor: &BackendDescriptor,
    img: &ImageBuffer,
    mask: Option<&MaskBuffer>,
    params: &StageParams,
    workdir: &Path,
    timeout: Duration,
) -> Result<ImageBuffer> {
    let BackendImpl::External {
        command_template,
        timeout_secs,
    } = &descriptor.implementation
    else {
        return Err(Error::param(format!("backend `{}` is not external", descriptor.backend_id)));
    };
    let timeout = timeout_secs.map(Duration::from_secs_f64).unwrap_or(timeout);
    let backend = descriptor.backend_id.clone();

    std::fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    let input = workdir.join(INPUT_FILE);
    let output = workdir.join(OUTPUT_FILE);
    let params_path = workdir.join(PARAMS_FILE);
    img.save(&input)?;
    let mask_path = match mask {
        Some(m) => {
            m.ensure_matches(img)?;
            let p = workdir.join(MASK_FILE);
            m.save(&p)?;
            p.display().to_string()
        }
        None => String::new(),
    };
    std::fs::write(&params_path, render_params_file(descriptor.stage, params))
        .map_err(|e| Error::io(&params_path, e))?;
    // A stale output from an earlier call in the same workdir must not count.
    let _ = std::fs::remove_file(&output);

    let words = shell_words::split(command_template)
        .map_err(|e| Error::param(format!("bad command_template for `{backend}`: {e}")))?;
    let words: Vec<String> = words
        .iter()
        .map(|w| {
            w.replace("{input}", &input.display().to_string())
                .replace("{mask}", &mask_path)
                .replace("{output}", &output.display().to_string())
                .replace("{params}", &params_path.display().to_string())
                .replace("{workdir}", &workdir.display().to_string())
        })
        .collect();
    let (program, args) = words
        .split_first()
        .ok_or_else(|| Error::param(format!("empty command_template for `{backend}`")))?;

    tracing::debug!(%backend, ?words, "running external backend");
    let mut child = Command::new(program)
        .args(args)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::BackendFailure {
            backend: backend.clone(),
            message: format!("could not start `{program}`: {e}"),
            diagnostics: String::new(),
        })?;
    let stdout = spawn_reader(child.stdout.take().expect("stdout piped"));
    let stderr = spawn_reader(child.stderr.take().expect("stderr piped"));

    let started = Instant::now();
    let status = loop {
        match child.try_wait().map_err(|e| Error::io(workdir, e))? {
            Some(status) => break status,
            None if started.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                // Reader threads are detached: grandchildren may still hold the pipes.
                return Err(Error::Timeout {
                    backend,
                    seconds: timeout.as_secs_f64(),
                });
            }
            None => thread::sleep(POLL_INTERVAL),
        }
    };
    let stdout = stdout.join().unwrap_or_default();
    let stderr = stderr.join().unwrap_or_default();

    if !status.success() {
        let err_text = tail(&stderr);
        let last_line = err_text.lines().last().unwrap_or("").to_string();
        let mut diagnostics = err_text;
        let out_text = tail(&stdout);
        if !out_text.is_empty() {
            diagnostics = format!("{diagnostics}\n--- stdout ---\n{out_text}");
        }
        return Err(Error::BackendFailure {
            backend,
            message: format!("{status}: {last_line}"),
            diagnostics,
        });
    }

    if !output.is_file() {
        return Err(Error::Protocol(format!("`{backend}` exited 0 but wrote no {OUTPUT_FILE}")));
    }
    let result = ImageBuffer::load(&output)
        .map_err(|e| Error::Protocol(format!("`{backend}` wrote an unreadable {OUTPUT_FILE}: {e}")))?;
    let expected = (img.width() * params.upscale, img.height() * params.upscale);
    if result.dimensions() != expected {
        return Err(Error::Protocol(format!(
            "`{backend}` returned {}x{}, expected {}x{}",
            result.width(),
            result.height(),
            expected.0,
            expected.1
        )));
    }
    if descriptor.stage == Stage::Colorize && result.channels() != 3 {
        return Err(Error::Protocol(format!("`{backend}` must return an RGB image for colorize")));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_file_roundtrip() {
        let mut p = StageParams::for_backend("sd-denoise");
        p.prompt = "4K, DSLR\nline two \\ back".into();
        p.strength = 0.008;
        p.steps = 50;
        p.guidance = 3.0;
        p.extras.insert("mode".into(), "a=b".into());
        let text = render_params_file(Stage::Denoise, &p);
        assert!(text.contains("strength=0.008\n"));
        assert!(text.contains("guidance=3\n"));
        let kv = parse_params_file(&text).unwrap();
        assert_eq!(kv["prompt"], p.prompt);
        assert_eq!(kv["stage"], "denoise");
        assert_eq!(kv["extras.mode"], "a=b");
        assert_eq!(kv["steps"], "50");
    }
}
