use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use oldphoto::imaging::gray_to_rgb;
use oldphoto::ImageBuffer;

fn oldphoto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oldphoto"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sources(dir: &Path, n: u32) -> PathBuf {
    let src = dir.join("src");
    std::fs::create_dir_all(&src).unwrap();
    for i in 0..n {
        ImageBuffer::from_fn(48, 40, 3, |x, y, c| (30 + x * 2 + y * (i + 1) + c as u32 * 10) as u8)
            .unwrap()
            .save(src.join(format!("{i}.png")))
            .unwrap();
    }
    src
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(oldphoto(&[]).status.code(), Some(1));
    assert_eq!(oldphoto(&["restore", "--input"]).status.code(), Some(1));
    assert_eq!(oldphoto(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    ImageBuffer::filled(16, 16, 1, 100).unwrap().save(&input).unwrap();
    let out = dir.path().join("out.png");
    let r = oldphoto(&["restore", "--input", p(&input), "--out", p(&out), "--preset", "nope"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope"));
    let r = oldphoto(&["restore", "--input", p(&input), "--out", p(&out), "--set", "denoise.strength=lots"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let r = oldphoto(&["restore", "--input", p(&dir.path().join("none.png")), "--out", p(&dir.path().join("o.png"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(r.stdout.is_empty());
}

#[test]
fn backend_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    ImageBuffer::filled(16, 16, 1, 100).unwrap().save(&input).unwrap();
    let backends = dir.path().join("backends.json");
    std::fs::write(
        &backends,
        r#"[{"backend_id": "crashy", "stage": "face", "kind": "external", "command_template": "sh -c 'echo no weights >&2; exit 2'"}]"#,
    )
    .unwrap();
    let r = oldphoto(&[
        "restore",
        "--input",
        p(&input),
        "--out",
        p(&dir.path().join("o.png")),
        "--backends",
        p(&backends),
        "--set",
        "face.backend_id=crashy",
    ]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no weights"));
}

#[test]
fn identity_restore_is_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageBuffer::from_fn(30, 20, 1, |x, y, _| (x * 7 + y) as u8).unwrap();
    let input = dir.path().join("in.png");
    img.save(&input).unwrap();
    let out = dir.path().join("out.png");
    let r = oldphoto(&["restore", "--input", p(&input), "--out", p(&out), "--preset", "identity"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(ImageBuffer::load(&out).unwrap(), gray_to_rgb(&img));
}

#[test]
fn restore_is_idempotent_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    ImageBuffer::from_fn(30, 20, 1, |x, y, _| (x * 7 + y) as u8).unwrap().save(&input).unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    let sepia = dir.path().join("sepia.png");
    for out in [&a, &b] {
        assert!(oldphoto(&["restore", "--input", p(&input), "--out", p(out), "--seed", "7"]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let r = oldphoto(&[
        "restore",
        "--input",
        p(&input),
        "--out",
        p(&sepia),
        "--set",
        "colorize.extras.mode=sepia",
        "--set",
        "face.upscale=1",
    ]);
    assert!(r.status.success());
    let img = ImageBuffer::load(&sepia).unwrap();
    assert_eq!(img.dimensions(), (30, 20));
    assert!(img.get(5, 5, 0) > img.get(5, 5, 2));
}

#[test]
fn degrade_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let src = sources(dir.path(), 4);
    let data = dir.path().join("data");
    let r = oldphoto(&["degrade", "--src", p(&src), "--out", p(&data), "--count", "3", "--seed", "5", "--jobs", "2"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let manifest = data.join("manifest.jsonl");
    assert_eq!(String::from_utf8_lossy(&r.stdout).trim(), manifest.display().to_string());
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 3);

    let table = dir.path().join("eval.csv");
    let r = oldphoto(&["eval", "--manifest", p(&manifest), "--out", p(&table), "--pad", "2"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("image_id,psnr,ssim,psnr_in_mask,psnr_out_mask"));
    assert!(lines[4].starts_with("mean,"));

    let recipe = dir.path().join("recipe.json");
    std::fs::write(&recipe, r#"{"noise_sigma_range": [1, 2], "unknown": 1}"#).unwrap();
    let r = oldphoto(&["degrade", "--src", p(&src), "--out", p(&data), "--recipe", p(&recipe)]);
    assert_ne!(r.status.code(), Some(0));
}

#[test]
fn default_recipe_file_matches_builtin() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/recipe.default.json");
    let loaded = oldphoto::DegradationRecipe::load(&path).unwrap();
    assert_eq!(loaded, oldphoto::DegradationRecipe::default());
}

#[test]
fn ballots_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/ballots");
    let out = dir.path().join("report.json");
    let r = oldphoto(&["ballots", "--in", p(&fixtures.join("quality.csv")), "--out", p(&out)]);
    assert!(r.status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report[0]["question_type"], "quality");
    assert_eq!(report[0]["percent"]["C"], 63.37);
    assert_eq!(report[0]["votes"]["C"], 960);
}

#[test]
fn serve_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_oldphoto"))
        .args(["serve", "--addr", &addr, "--sessions", p(&dir.path().join("sessions"))])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let started = Instant::now();
    let response = loop {
        match TcpStream::connect(&addr) {
            Ok(mut s) => {
                write!(s, "GET /backends?stage=colorize HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
                let mut text = String::new();
                s.read_to_string(&mut text).unwrap();
                break text;
            }
            Err(_) if started.elapsed() < Duration::from_secs(10) => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => panic!("server did not start: {e}"),
        }
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("reference-colorize"));
}
