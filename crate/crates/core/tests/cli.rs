use std::path::Path;
use std::process::{Command, Output};

use mbdl::fixture::{render_page, PageConfig};
use mbdl::pbm::{save_image, PbmFormat};

fn mbdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbdl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn page(dir: &Path) -> String {
    let cfg = PageConfig {
        width: 200,
        height: 120,
        glyphs: 40,
    };
    let path = dir.join("clean.pbm");
    save_image(&render_page(&cfg, 4), &path, PbmFormat::Raw).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn eval_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(dir.path());
    let o = mbdl(&["eval", &p, &p]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0");
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(dir.path());
    let a = dir.path().join("a.pbm");
    let b = dir.path().join("b.pbm");
    for out in [&a, &b] {
        let o = mbdl(&[
            "synth",
            &p,
            "--sigma2",
            "0.1",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn encode_decode_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(dir.path());
    let s = dir.path().join("s.mbdl");
    let d = dir.path().join("d.pbm");
    let o = mbdl(&["encode", &p, "--mode", "cee-lossless", "--out", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = mbdl(&["decode", s.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&d).unwrap());
}

#[test]
fn restore_writes_image_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(dir.path());
    let noisy = dir.path().join("n.pbm");
    let out = dir.path().join("r.pbm");
    let trace = dir.path().join("t.csv");
    mbdl(&[
        "synth",
        &p,
        "--sigma2",
        "0.12",
        "--seed",
        "1",
        "--out",
        noisy.to_str().unwrap(),
    ]);
    let o = mbdl(&[
        "restore",
        noisy.to_str().unwrap(),
        "--sigma2",
        "0.12",
        "--out",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists());
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("iteration,likelihood_nats,prior_nats,total_nats,pixels_flipped"));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(dir.path());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 7\nsigma2 = 0.1\n").unwrap();
    let a = dir.path().join("a.pbm");
    let b = dir.path().join("b.pbm");
    mbdl(&[
        "synth",
        &p,
        "--sigma2",
        "0.1",
        "--seed",
        "7",
        "--out",
        a.to_str().unwrap(),
    ]);
    let o = mbdl(&[
        "synth",
        &p,
        "--seed",
        "99",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bench_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    page(&corpus);
    let csv = dir.path().join("bench.csv");
    let cfg = dir.path().join("bench.cfg");
    std::fs::write(
        &cfg,
        "sigmas = 0.1\nmethods = wxor-lossless, cee-lossless\nworkers = 1\n",
    )
    .unwrap();
    let o = mbdl(&[
        "bench",
        corpus.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);
    assert!(stdout(&o).contains("cee-lossless"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(dir.path());
    assert_eq!(mbdl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mbdl(&["eval", &p, "--bogus", &p]).status.code(), Some(1));
    assert_eq!(
        mbdl(&["encode", &p, "--mode", "lossy", "--out", "x"]).status.code(),
        Some(1)
    );
    let o = mbdl(&["restore", &p, "--mode", "wxor-lossless", "--out", "x.pbm"]);
    assert_eq!(o.status.code(), Some(1));
    let missing = dir.path().join("missing.pbm");
    assert_eq!(mbdl(&["eval", &p, missing.to_str().unwrap()]).status.code(), Some(2));
    let junk = dir.path().join("junk.mbdl");
    std::fs::write(&junk, b"not a stream").unwrap();
    let out = dir.path().join("o.pbm");
    assert_eq!(
        mbdl(&["decode", junk.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(
        mbdl(&["bench", empty.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}
