#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const CUBE: &str = r#"{
  "kind": "polytope",
  "n": 3,
  "facets": [
    {"normal": [1, 0, 0], "offset": 1, "area": 4},
    {"normal": [-1, 0, 0], "offset": 1, "area": 4},
    {"normal": [0, 1, 0], "offset": 1, "area": 4},
    {"normal": [0, -1, 0], "offset": 1, "area": 4},
    {"normal": [0, 0, 1], "offset": 1, "area": 4},
    {"normal": [0, 0, -1], "offset": 1, "area": 4}
  ]
}
"#;

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

pub fn affcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affcap"))
        .args(args)
        .output()
        .expect("affcap runs")
}

pub fn json_of(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
