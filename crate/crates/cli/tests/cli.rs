//! End-to-end checks of the `csksim` binary: determinism, manifest replay,
//! layout export and configuration diagnostics.

use std::fs;
use std::path::Path;
use std::process::Command;

fn csksim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csksim"))
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn analytic_preset_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = csksim()
            .args(["analytic", "--preset", "fig10", "--out"])
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["tx_id.csv", "rx_thr_b0.csv", "y0.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn manifest_replay_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let replay = tempfile::tempdir().unwrap();
    let out = csksim()
        .args(["analytic", "--preset", "fig10", "--out"])
        .arg(first.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = first.path().join("manifest.json");
    let out = csksim()
        .args(["analytic", "--config"])
        .arg(&manifest)
        .arg("--out")
        .arg(replay.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["tx_id.csv", "y0.csv"] {
        assert_eq!(read(first.path(), name), read(replay.path(), name), "{name} differs");
    }
}

#[test]
fn synth_exports_the_quadruple_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = csksim()
        .args(["synth", "--m", "2", "--thresholds", "0.1 nM,0.45 nM,0.7 nM", "--dot", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let layout: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "layout.json")).unwrap();
    let pops = layout["populations"].as_array().unwrap();
    assert_eq!(pops.len(), 13);
    let thresholds = pops
        .iter()
        .filter(|p| p["kind"] == "Threshold")
        .count();
    assert_eq!(thresholds, 4);
    assert_eq!(layout["sinks"].as_array().unwrap().len(), 2);
    let dot = String::from_utf8(read(dir.path(), "layout.dot")).unwrap();
    assert!(dot.contains("digraph") && dot.contains("tx_s1"));
}

#[test]
fn unitless_config_fails_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(
        &config,
        r#"
[geometry]
stations = ["0 um", "1 um", "4 um", "39 um", "42 um", "43 um"]
lanes = ["0 um", "5 um"]
height = "3 um"
cell_radius = "0.5 um"
flow = "0.1"

[species.aCa]
beta = "0.0369 nM/min"
theta = "0.26 1/nM"
hill = 0.9
k_d = "0.05 1/min"
diffusion = "89 um^2/s"
wall_absorption = "9 um/s"

[species.DOX]
beta = "0.162 nM/min"
theta = "0.167 1/nM"
hill = 1.2
k_d = "0.023 1/min"
diffusion = "89 um^2/s"
wall_absorption = "9 um/s"

[species.aSc]
beta = "0.162 nM/min"
theta = "0.167 1/nM"
hill = 1.2
k_d = "0.023 1/min"
diffusion = "89 um^2/s"
wall_absorption = "9 um/s"

[repressor]
beta = "0.615 nM/min"
theta = "1550 1/nM"
hill = 2.0
k_d = "0.15 1/min"

[threshold_input]
theta = "0.167 1/nM"
hill = 1.2

[cells]
exchange = 1.0
release = "20 1/s"
reaction = "1 1/(nM s)"

[layout]
order = 1
thresholds = ["0.01 nM"]

[input]
symbols = [1]
amplitude = "50 nM"
duration = "10 s"
period = "5 h"
start = "1 h"

[run]
ts = "1 s"
horizon = "4 h"
seed = 1
realizations = 10
particle_substeps = 100
reference_depth = "1.6605 um"
"#,
    )
    .unwrap();
    let out = csksim()
        .args(["analytic", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("geometry.flow"), "{err}");
}

#[test]
fn kernel_cache_replay_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cache = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = csksim()
            .args(["analytic", "--preset", "fig10", "--kernel-cache"])
            .arg(cache.path())
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(fs::read_dir(cache.path()).unwrap().count() >= 3, "kernels not cached");
    assert_eq!(read(a.path(), "y0.csv"), read(b.path(), "y0.csv"));
}

#[test]
fn ber_subcommand_recovers_a_short_sequence() {
    // A threshold at roughly half the bit-1 response recovers a 16-bit
    // random sequence exactly at a 10 h symbol interval.
    let dir = tempfile::tempdir().unwrap();
    let out = csksim()
        .args(["ber", "--preset", "fig13", "--bits", "16", "--tb", "10 h", "--nd", "0,15", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(read(dir.path(), "ber.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "N_d,T_b_s,errors,bits,ber");
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    // N_d = 15 molecules sits below the weakest bit-1 response (~30) and
    // far above any bit-0 level: zero errors over 16 bits.
    assert_eq!(rows[1][0], "15");
    assert_eq!(rows[1][2], "0", "errors at the half-response threshold: {csv}");
    assert_eq!(rows[1][4], "0");
}
