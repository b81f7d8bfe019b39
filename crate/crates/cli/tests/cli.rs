//! End-to-end tests of the `simulate` binary: artifact layout, exit codes,
//! sweep summaries, and the physics each summary column should show.

use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use spinwave_core::spinwave::{CurveMeta, DecayCurve};

fn simulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("spawn simulate")
}

fn write_scenario(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.display().to_string()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Centimeter-scale paraffin cell, collinear beams, with a stimulation block so
/// every artifact kind gets produced. Deliberately small atom count.
fn full_scenario() -> String {
    r#"{
        "cell": {"length_m": 0.05, "radius_m": 2.5e-3,
                 "wall": {"kind": "paraffin", "spin_destruction_prob": 2e-4}},
        "thermal": {"temperature_k": 351.15, "atomic_mass_kg": 1.4432e-25},
        "optics": {"write_wavelength_m": 7.95e-7, "detection_angle_rad": 0.0,
                   "write_waist_m": 1.5e-3, "read_waist_m": 5e-3},
        "sim": {"n_atoms": 1500, "seed": 11,
                "time_grid": {"t_max_s": 6e-5, "n_points": 16}},
        "analysis": {"fit_models": ["exp1"]},
        "stimulation": {"gain_per_watt": 2.4e8, "decay_rate_hz": 6.14,
                        "powers_w": [2.5e-4, 1e-3, 4e-3]}
    }"#
    .to_string()
}

#[test]
fn run_produces_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &full_scenario());
    let out_dir = dir.path().join("out");

    let out = simulate(&["run", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("16 points"), "stdout: {stdout}");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["n_atoms"], 1500);
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["scenario_digest"].as_str().unwrap().len() == 64);

    // Every artifact the manifest lists exists and hashes to the recorded value.
    let artifacts = manifest["artifacts"].as_object().unwrap();
    for name in ["curve.csv", "fit.json", "stimulation.csv"] {
        let recorded = artifacts[name].as_str().unwrap();
        let actual = sha256_hex(&std::fs::read(out_dir.join(name)).unwrap());
        assert_eq!(recorded, actual, "{name} hash mismatch");
    }

    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["selected_model"], "exp1");

    // Three stimulation rows, power column matching the scenario.
    let stim = std::fs::read_to_string(out_dir.join("stimulation.csv")).unwrap();
    let rows: Vec<&str> = stim.lines().collect();
    assert_eq!(rows[0], "power_w,delay_s");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("2.5e-4,"));
}

#[test]
fn curve_csv_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &full_scenario());
    let out_dir = dir.path().join("out");
    let out = simulate(&["run", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let text = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    let curve = DecayCurve::from_csv(&text, CurveMeta::external("reparse")).unwrap();
    assert_eq!(curve.to_csv(), text);
}

#[test]
fn seed_and_atom_overrides_land_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &full_scenario());
    let out_dir = dir.path().join("out");
    let out = simulate(&[
        "run",
        &scenario,
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "99",
        "--atoms",
        "800",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 99);
    assert_eq!(manifest["n_atoms"], 800);
    assert_eq!(manifest["scenario"]["sim"]["seed"], 99);
}

#[test]
fn rerun_with_equal_seed_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &full_scenario());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = simulate(&["run", &scenario, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    for name in ["curve.csv", "fit.json", "manifest.json", "stimulation.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn unknown_scenario_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = full_scenario().replace("\"n_atoms\"", "\"n_atom\"");
    let scenario = write_scenario(dir.path(), "s.json", &bad);
    let out = simulate(&["run", &scenario, "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("n_atom"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn invalid_value_names_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = full_scenario().replace("\"radius_m\": 2.5e-3", "\"radius_m\": -2.5e-3");
    let scenario = write_scenario(dir.path(), "s.json", &bad);
    let out = simulate(&["run", &scenario, "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("cell.radius_m"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn missing_scenario_file_is_a_usage_error() {
    let out = simulate(&["run", "/nonexistent/s.json", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("/nonexistent/s.json"));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(["run", "x", "--out", "y"])
        .env("SPINWAVE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("SPINWAVE_THREADS"));
}

/// Ballistic base for angle sweeps: default paraffin walls are effectively
/// lossless over the 8 us window, so the fitted gauss1 tau tracks the
/// angle-dependent dephasing alone.
fn angle_sweep_scenario() -> String {
    r#"{
        "cell": {"length_m": 0.05, "radius_m": 2.5e-3, "wall": {"kind": "paraffin"}},
        "thermal": {"temperature_k": 351.15, "atomic_mass_kg": 1.4432e-25},
        "optics": {"write_wavelength_m": 7.95e-7, "detection_angle_rad": 0.0,
                   "write_waist_m": 1.0, "read_waist_m": 1.0},
        "sim": {"n_atoms": 3000, "seed": 31,
                "time_grid": {"t_max_s": 8e-6, "n_points": 24}},
        "analysis": {"fit_models": ["gauss1"]}
    }"#
    .to_string()
}

#[test]
fn angle_sweep_shortens_the_dominant_tau() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &angle_sweep_scenario());
    let out_dir = dir.path().join("out");
    let out = simulate(&[
        "sweep",
        &scenario,
        "--param",
        "optics.detection_angle_rad",
        "--values",
        "2e-4,5e-4,1e-3,2e-3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let summary =
        std::fs::read_to_string(out_dir.join("sweep_detection_angle_rad/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("value,dominant_tau_s"));
    let taus: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(taus.len(), 4);
    assert!(
        taus.windows(2).all(|w| w[1] < w[0]),
        "tau should fall as the detection angle opens: {taus:?}"
    );
    // Per-value run directories carry their own artifacts.
    assert!(out_dir
        .join("sweep_detection_angle_rad/2e-4/curve.csv")
        .exists());
    assert!(out_dir
        .join("sweep_detection_angle_rad/2e-3/fit.json")
        .exists());
}

/// Zero hyperfine split with collinear beams makes the write and Stokes
/// wavevectors cancel exactly, leaving wall destruction as the only decay
/// channel; retrieval then decays as the squared survivor fraction.
fn wall_sweep_scenario() -> String {
    r#"{
        "cell": {"length_m": 0.05, "radius_m": 2.5e-3,
                 "wall": {"kind": "paraffin", "spin_destruction_prob": 1e-3}},
        "thermal": {"temperature_k": 351.15, "atomic_mass_kg": 1.4432e-25},
        "optics": {"write_wavelength_m": 7.95e-7, "hyperfine_split_hz": 0.0,
                   "detection_angle_rad": 0.0, "write_waist_m": 1.0, "read_waist_m": 1.0},
        "sim": {"n_atoms": 1500, "seed": 41,
                "time_grid": {"t_max_s": 1.2e-2, "n_points": 20}},
        "analysis": {"fit_models": ["exp1"]}
    }"#
    .to_string()
}

#[test]
fn wall_destruction_sweep_matches_kinetic_lifetime() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &wall_sweep_scenario());
    let out_dir = dir.path().join("out");
    let out = simulate(&[
        "sweep",
        &scenario,
        "--param",
        "cell.wall.spin_destruction_prob",
        "--values",
        "4e-3,2e-3,1e-3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let summary =
        std::fs::read_to_string(out_dir.join("sweep_spin_destruction_prob/summary.csv")).unwrap();
    let tau_wall = 1.6281181977213303e-5; // 4V / (v S) for this cell at 78 C
    for line in summary.lines().skip(1) {
        let mut cols = line.split(',');
        let p: f64 = cols.next().unwrap().parse().unwrap();
        let tau: f64 = cols.next().unwrap().parse().unwrap();
        let expected = tau_wall / (2.0 * p);
        assert!(
            (tau / expected - 1.0).abs() < 0.15,
            "p = {p:e}: dominant tau {tau:e} vs squared-survival lifetime {expected:e}"
        );
    }
}

#[test]
fn stimulation_sweep_reports_longest_delay() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &full_scenario());
    let out_dir = dir.path().join("out");
    let out = simulate(&[
        "sweep",
        &scenario,
        "--param",
        "stimulation.gain_per_watt",
        "--values",
        "1.2e8,2.4e8",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let summary = std::fs::read_to_string(out_dir.join("sweep_gain_per_watt/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("value,longest_delay_s"));
    let delays: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // Halving the gain lengthens the onset of the slowest power.
    assert!(delays[0] > delays[1], "delays: {delays:?}");
}

#[test]
fn sweep_value_and_param_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &full_scenario());
    let out_arg = dir.path().join("out");
    let base = [
        "sweep",
        scenario.as_str(),
        "--out",
        out_arg.to_str().unwrap(),
    ];

    for (param, values, needle) in [
        ("optics.detection_angle_rad", "1,,2", "values"),
        ("optics.detection_angle_rad", "abc", "abc"),
        ("optics.detection_angle_rad", "", "values"),
        ("optics.no_such_knob", "1,2", "no_such_knob"),
        ("cell.wall", "1,2", "scalar"),
        ("cell.radius_m", "-1e-3,1e-3", "cell.radius_m"),
    ] {
        let values_arg = format!("--values={values}");
        let mut args = base.to_vec();
        args.extend(["--param", param, &values_arg]);
        let out = simulate(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{param} {values:?} should be a usage error"
        );
        assert!(
            stderr_of(&out).contains(needle),
            "{param} {values:?}: stderr {:?} should mention {needle:?}",
            stderr_of(&out)
        );
    }
}
