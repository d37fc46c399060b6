//! End-to-end behavior of the `fabric` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fabric_cli::config::{parse_config, read_config};
use fabric_cli::export::{parse_csv, read_manifest, trajectory_csv};
use fabric_cli::verify::shipped_config;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fabric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fabric"))
        .args(args)
        .env("FABRIC_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_manifest_csvs_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pc");
    let cfg = configs().join("path_consistency.cfg");
    let o = fabric(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.kind, "path_consistency");
    assert!(m.summary_value("frechet_max").unwrap() < 1e-3);
    for r in &m.rollouts {
        let text = std::fs::read_to_string(out.join(r.csv.as_ref().unwrap())).unwrap();
        assert_eq!(parse_csv(&text).unwrap().rows.len(), r.rows);
    }
    assert!(out.join("path_consistency_paths.svg").exists());
    let o = fabric(&["plot", out.to_str().unwrap(), "--style", "energy_trace"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("path_consistency_energy_trace.svg").exists());
}

#[test]
fn overrides_and_seed_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("commutation_polar.cfg");
    let o = fabric(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "integration.horizon=1.0",
        "--seed",
        "9",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_manifest(dir.path()).unwrap();
    assert_eq!(m.overrides, vec!["integration.horizon=1.0".to_string(), "experiment.seed=9".to_string()]);
    assert_eq!(m.seed, 9);
    assert_eq!(m.config.integration.horizon, 1.0);
    assert!(m.rollouts.iter().all(|r| r.rows == 101));
}

#[test]
fn bad_config_exits_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("layered_A.cfg");
    let o = fabric(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--set", "integration.dtt=1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("integration"), "{}", stderr(&o));
    let o = fabric(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--set", "integration.dt=-1"]);
    assert_eq!(code(&o), 2);
    let o = fabric(&["run", "/nonexistent.cfg", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn barrier_violation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("layered_B_fabric.cfg");
    let o = fabric(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("barrier violation"));
    let m = read_manifest(dir.path()).unwrap();
    assert!(m.terminal_kind(0).is_some());
}

#[test]
fn plot_without_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fabric(&["plot", dir.path().to_str().unwrap(), "--style", "paths"]);
    assert_eq!(code(&o), 2);
    let o = fabric(&["plot", dir.path().to_str().unwrap(), "--style", "bogus"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_algebra_passes() {
    let o = fabric(&["verify", "--suite", "algebra"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("PASS"));
    assert!(!table.contains("FAIL"));
}

#[test]
fn shipped_configs_match_embedded_copies() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_str().unwrap().to_string();
        let (from_disk, _) = read_config(&path, &[]).unwrap();
        assert_eq!(from_disk, shipped_config(&name, &[]).unwrap(), "{name}");
    }
}

#[test]
fn config_round_trips_through_toml() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let (cfg, _) = read_config(&path, &[]).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let (back, _) = parse_config(&text, &[]).unwrap();
        assert_eq!(back, cfg, "{}", path.display());
    }
}

#[test]
fn csv_round_trips_bit_exactly() {
    let cfg = shipped_config("commutation_polar", &["integration.horizon=0.5".into()]).unwrap();
    let run = fabric::sim::experiments::run_experiment(&cfg).unwrap();
    for r in &run.rollouts {
        let table = parse_csv(&trajectory_csv(r)).unwrap();
        for (k, row) in table.rows.iter().enumerate() {
            assert_eq!(row[0].to_bits(), r.times[k].to_bits());
            for (i, q) in r.positions[k].iter().enumerate() {
                assert_eq!(row[1 + i].to_bits(), q.to_bits());
            }
        }
    }
}
