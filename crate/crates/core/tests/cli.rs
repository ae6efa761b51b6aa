use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
    "sizes": {"train": 12, "val": 4, "test_per_snr": 3, "lmmse_calibration": 50},
    "snr_grid_db": [0, 20],
    "training": {"epochs": 1, "batch_size": 4}
}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icinet-lab")).args(args).output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let p = dir.join("small.json");
    fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn count_complexity_without_config() {
    let out = bin(&["count-complexity", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("CasResNet,4530176,2562"));
    assert!(text.contains("ICINet,5906432,3364"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(bin(&["count-complexity", "--nope"]).status.code(), Some(1));
    assert_eq!(bin(&[]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.icin");
    let out = bin(&["evaluate", "--test", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.icin");
    fs::write(&bad, b"ICINgarbage").unwrap();
    assert_eq!(bin(&["evaluate", "--test", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, r#"{"snr_grid_db": []}"#).unwrap();
    let out = bin(&["--config", p.to_str().unwrap(), "count-complexity"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snr_grid_db"));
}

#[test]
fn pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d);
    let path = |n: &str| d.join(n).to_string_lossy().into_owned();
    for split in ["train", "val", "test"] {
        let out = bin(&["--config", &cfg, "--seed", "3", "generate-dataset", "--split", split, "--out", &path(split)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let train = |mode: &str, name: &str| {
        let out = bin(&[
            "--config", &cfg, "--seed", "3", "train", "--mode", mode, "--train", &path("train"), "--val", &path("val"),
            "--out", &path(name), "--trace", &path(&format!("{name}.json")),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    };
    train("sequential", "seq.iciw");
    train("e2e", "e2e.iciw");
    train("predn", "predn.iciw");
    train("casres", "casres.iciw");
    let out = bin(&[
        "--config", &cfg, "--seed", "3", "evaluate", "--test", &path("test"), "--predn", &path("predn.iciw"),
        "--casres", &path("casres.iciw"), "--icinet-seq", &path("seq.iciw"), "--icinet-e2e", &path("e2e.iciw"),
        "--lmmse", "--out", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "snr_db,mse_ls,mse_predn,mse_casres,mse_icinet_seq,mse_icinet_e2e,mse_lmmse");
    assert_eq!(lines.len(), 3);
    let out = bin(&["--config", &cfg, "evaluate", "--test", &path("test"), "--out", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["columns"][0], "mse_ls");
    let trace: serde_json::Value = serde_json::from_str(&fs::read_to_string(path("seq.iciw.json")).unwrap()).unwrap();
    assert_eq!(trace.as_array().unwrap().len(), 2);
}

#[test]
fn sweep_and_dump_cfr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = bin(&["--config", &cfg, "sweep-nici", "--values", "0,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n_ici,val_mse,test_mse_0db,test_mse_20db");
    assert_eq!(text.lines().count(), 3);

    let out = bin(&["dump-cfr", "--doppler", "0", "--symbol", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 128);
    assert!(rows.iter().all(|r| r.len() == 128));
    let max = rows.iter().flatten().cloned().fold(0.0, f64::max);
    assert!((max - 1.0).abs() < 1e-12);
    for (k, r) in rows.iter().enumerate() {
        for (m, v) in r.iter().enumerate() {
            if k != m {
                assert!(*v < 1e-8);
            }
        }
    }
}
