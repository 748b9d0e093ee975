use std::fs;
use std::path::Path;
use std::process::Command;

use wsdrive::config::parse_config;
use wsdrive::presets;

fn wsdrive(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wsdrive"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SHORT_SQUARE: &str = "[lattice]\ndepth_x = 2.5\nforce_x = 0.2\n\n[drive]\npreset = \"square\"\n\n[run]\nduration = 1\nengine = \"rwa\"\n";

#[test]
fn every_preset_round_trips() {
    for name in presets::NAMES {
        let out = wsdrive(&["preset", name]);
        assert!(out.status.success(), "{name}");
        let text = String::from_utf8(out.stdout).unwrap();
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed, presets::preset(name).unwrap(), "{name}");
        assert_eq!(parsed.to_toml(), text);
    }
}

#[test]
fn unknown_preset_fails() {
    let out = wsdrive(&["preset", "spiral"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("spiral"));
}

#[test]
fn zero_force_is_rejected_with_its_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SHORT_SQUARE.replace("force_x = 0.2", "force_x = 0"),
    );
    let out = wsdrive(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no Wannier-Stark ladder"));
}

#[test]
fn typo_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SHORT_SQUARE.replace("depth_x", "depht_x"));
    let out = wsdrive(&["run", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn zero_duration_writes_only_the_initial_frame() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SHORT_SQUARE.replace("duration = 1", "duration = 0"),
    );
    let out_dir = dir.path().join("out");
    let out = wsdrive(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let frames: Vec<_> = fs::read_dir(out_dir.join("frames")).unwrap().collect();
    assert_eq!(frames.len(), 2, "one .bin and one .pgm");
    assert!(out_dir.join("frames/density_00000.bin").exists());
    assert!(!out_dir.join("averaged.csv").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_SQUARE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = wsdrive(&[
            "run",
            &cfg,
            "--out",
            d.to_str().unwrap(),
            "--engine",
            "grid2d_separable",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in [
        "series.csv",
        "manifest.toml",
        "summary.toml",
        "frames/density_00001.bin",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn basis_rwa_and_compile_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("t");
    let o = out_dir.to_str().unwrap();
    let cfg = write_config(dir.path(), SHORT_SQUARE);
    assert!(wsdrive(&["basis", &cfg, "--out", o]).status.success());
    let moments = fs::read_to_string(out_dir.join("basis_x_moments.csv")).unwrap();
    assert!(moments.starts_with("p,m_p\n"));
    assert_eq!(moments.lines().count(), 1 + 7);

    assert!(wsdrive(&["rwa", &cfg, "--out", o]).status.success());
    let coeffs = fs::read_to_string(out_dir.join("coefficients_x.csv")).unwrap();
    assert!(coeffs.starts_with("time,n,re,im,centroid,sigma_re,sigma_im\n"));

    // no path block
    assert!(!wsdrive(&["compile", &cfg, "--out", o]).status.success());
    let path_cfg = presets::beta_path().to_toml();
    let cfg = write_config(dir.path(), &path_cfg);
    let out = wsdrive(&["compile", &cfg, "--out", o]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let w = fs::read_to_string(out_dir.join("waveforms.csv")).unwrap();
    assert!(w.starts_with("time,alpha_x,beta_x,alpha_y,beta_y\n"));
    assert_eq!(w.lines().count(), 1 + 801);
}
