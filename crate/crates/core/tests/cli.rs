use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypocodec"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn setup(dir: &Path) {
    fs::write(dir.join("codec.toml"), "preset = \"micro\"\n\n[grid]\noverlap = [2, 2]\nfusion = \"blend\"\n").unwrap();
    ok(dir, &["synth", "--pattern", "drifting_gradient", "--frames", "5", "--height", "12", "--width", "14", "--out", "in.rgb"]);
    ok(dir, &["pretrain", "--config", "codec.toml", "--synthetic", "3", "--epochs", "20", "--out", "base.tcnb", "--trace", "pre.csv"]);
}

const FAST: [&str; 4] = ["--iterations", "40", "--finetune-iterations", "10"];

#[test]
fn encode_decode_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d);
    let mut args = vec!["encode", "--config", "codec.toml", "--base", "base.tcnb", "--input", "in.rgb", "--bits", "6", "--out", "v.tcnv", "--trace", "fit.csv"];
    args.extend(FAST);
    ok(d, &args);
    ok(d, &["decode", "--base", "base.tcnb", "--input", "v.tcnv", "--out", "out"]);
    let frames: Vec<_> = fs::read_dir(d.join("out")).unwrap().collect();
    assert_eq!(frames.len(), 5);
    ok(d, &["decode", "--base", "base.tcnb", "--input", "v.tcnv", "--out", "out.rgb"]);
    assert!(d.join("out.rgb.meta").exists());
    let report = ok(d, &["eval", "--reference", "in.rgb", "--decoded", "out", "--container", "v.tcnv"]);
    for key in ["psnr_db", "ssim", "bpp"] {
        assert!(report.lines().any(|l| l.starts_with(key)), "{report}");
    }
    let same = ok(d, &["eval", "--reference", "out.rgb", "--decoded", "out"]);
    assert!(same.contains("psnr_db 100.0000"), "{same}");
    let trace = fs::read_to_string(d.join("fit.csv")).unwrap();
    assert!(trace.starts_with("position,stage,clip,iteration,loss\n"));
    assert!(fs::read_to_string(d.join("pre.csv")).unwrap().lines().count() == 21);
}

#[test]
fn mismatched_or_damaged_inputs_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d);
    let mut args = vec!["encode", "--base", "base.tcnb", "--input", "in.rgb", "--out", "v.tcnv"];
    args.extend(FAST);
    ok(d, &args);
    ok(d, &["pretrain", "--config", "codec.toml", "--synthetic", "3", "--epochs", "20", "--seed", "5", "--out", "other.tcnb"]);
    let out = run(d, &["decode", "--base", "other.tcnb", "--input", "v.tcnv", "--out", "x.rgb"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
    assert!(!d.join("x.rgb").exists());

    let mut bytes = fs::read(d.join("v.tcnv")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    fs::write(d.join("bad.tcnv"), &bytes).unwrap();
    let out = run(d, &["decode", "--base", "base.tcnb", "--input", "bad.tcnv", "--out", "y.rgb"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));

    fs::write(d.join("tiny.toml"), "preset = \"tiny\"\n").unwrap();
    let out = run(d, &["encode", "--config", "tiny.toml", "--base", "base.tcnb", "--input", "in.rgb", "--out", "z.tcnv"]);
    assert!(!out.status.success());
    assert!(!run(d, &["encode", "--base", "base.tcnb", "--input", "in.rgb", "--bits", "9", "--out", "z.tcnv"]).status.success());
    assert!(!run(d, &["encode", "--base", "base.tcnb", "--input", "in.rgb", "--overlap", "3", "--out", "z.tcnv"]).status.success());
    assert!(!d.join("z.tcnv").exists());
}

#[test]
fn rd_sweep_writes_the_csv_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d);
    let mut args = vec![
        "rd-sweep", "--base", "base.tcnb", "--input", "in.rgb", "--bits", "4,8", "--lambda", "0,0.3", "--residual-mode",
        "none,first,previous", "--out", "rd.csv",
    ];
    args.extend(FAST);
    ok(d, &args);
    let csv = fs::read_to_string(d.join("rd.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "bits,lambda,mode,psnr_db,ssim,bpp,encode_s,decode_s");
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
}
