#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn standard_config() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/standard.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A quick variant of the standard scenario for plumbing tests.
pub fn small_config() -> Value {
    let mut v = standard_config();
    v["train"]["hidden_width"] = json!(8);
    v["train"]["epochs"] = json!(3);
    v["train"]["batch_size"] = json!(16);
    v["data"]["n_samples"] = json!(300);
    v["data"]["noise_sigma"] = json!(0.01);
    v["smo"]["max_iterations"] = json!(3);
    v["smo"]["retrain_epochs"] = json!(2);
    v["smo"]["restarts"] = json!(1);
    v
}

/// Writes `cfg` into `dir` with all outputs under `dir`; returns the config path.
pub fn write_config(dir: &Path, mut cfg: Value) -> PathBuf {
    cfg["paths"] = json!({ "dataset": "dataset.csv", "checkpoint": "checkpoint.json", "report": "report" });
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

pub fn spacemap(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spacemap"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("spawn spacemap")
}

pub fn run_ok(config: &Path, args: &[&str]) -> String {
    let out = spacemap(config, args);
    assert!(
        out.status.success(),
        "spacemap {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every regular file under `dir`, relative path and contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "config.json" {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}
