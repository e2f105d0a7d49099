use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn widthlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_widthlab")).args(args).env_remove("WIDTHLAB_WORKERS").output().unwrap()
}

fn write_config(dir: &Path, eta0: f64) -> String {
    let text = format!(
        r#"{{"preset":"LAZY_SPECTRAL",
 "net":{{"depth":3,"input_dim":5,"output_dim":1,"alpha0":1000.0,"parameterization":"MUP","seed":1}},
 "widths":[8,16],"seeds_per_width":2,
 "schedule":{{"eta0":{eta0},"batch_size":16,"steps":20}},
 "task":{{"input_dim":5,"kind":{{"GEGENBAUER_REGRESSION":{{"degree":2,"beta_seed":11}}}}}},
 "stream":{{"data_seed":7,"mode":"ONLINE"}},
 "probe_count":16,"record_every":5,"full_batch":true,"center_output":true}}"#
    );
    let path = dir.join("cfg.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_report_and_spectra_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 5.0);
    let out = dir.path().join("run");
    let o = widthlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "losses.csv", "spectra.csv", "kernels/step_00000000/lazy.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let merged = dir.path().join("merged");
    let o = widthlab(&["report", "--runs", out.to_str().unwrap(), "--out", merged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(merged.join("convergence.csv").exists());
    let o = widthlab(&["spectra", "--run", out.to_str().unwrap(), "--step", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("kernels/step_00000020/spectra.csv").exists());
}

#[test]
fn worker_env_var_is_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 5.0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = Command::new(env!("CARGO_BIN_EXE_widthlab"))
        .args(["run", "--config", &cfg, "--out", a.to_str().unwrap()])
        .env("WIDTHLAB_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(widthlab(&["run", "--config", &cfg, "--out", b.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("losses.csv")).unwrap(), fs::read(b.join("losses.csv")).unwrap());
}

#[test]
fn diverging_sweep_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1e12);
    let out = dir.path().join("run");
    let o = widthlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("losses.csv").exists());
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = dir.path().join("out");
    assert_eq!(widthlab(&["run", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"preset":"LAZY_SPECTRAL","extra":1}"#).unwrap();
    assert_eq!(widthlab(&["run", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(widthlab(&["report", "--out", out.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(widthlab(&["spectra", "--run", out.to_str().unwrap(), "--step", "0"]).status.code(), Some(1));
    assert_eq!(widthlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(widthlab(&["--help"]).status.code(), Some(0));
}
