//! Result files: per-trace CSVs and the run manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use csk_core::scenario::Scenario;
use csk_core::trace::SignalTrace;
use csk_core::units::MOLECULES_PER_NM_UM3;

use crate::config::Manifest;

/// Writes an analytic trace: time_s, value_nM, value_molecules.
pub fn write_trace_csv(
    dir: &Path,
    name: &str,
    trace: &SignalTrace,
    volume: f64,
) -> Result<()> {
    let path = dir.join(format!("{name}.csv"));
    let mut out = String::with_capacity(trace.len() * 32);
    out.push_str("time_s,value_nM,value_molecules\n");
    for (k, &v) in trace.values().iter().enumerate() {
        let molecules = v * volume * MOLECULES_PER_NM_UM3;
        out.push_str(&format!("{},{v},{molecules}\n", trace.time_at(k)));
    }
    fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes an ensemble trace: time_s, value_nM, value_molecules, stderr
/// (standard error of the per-interval molecule count).
pub fn write_ensemble_csv(
    dir: &Path,
    name: &str,
    ts: f64,
    mean_counts: &[f64],
    stderr_counts: &[f64],
    volume: f64,
) -> Result<()> {
    let path = dir.join(format!("{name}.csv"));
    let mut out = String::with_capacity(mean_counts.len() * 40);
    out.push_str("time_s,value_nM,value_molecules,stderr\n");
    for (k, (&m, &se)) in mean_counts.iter().zip(stderr_counts).enumerate() {
        let nm = m / (volume * MOLECULES_PER_NM_UM3);
        out.push_str(&format!("{},{nm},{m},{se}\n", k as f64 * ts));
    }
    fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct BerRow {
    pub n_d: f64,
    pub t_b: f64,
    pub errors: usize,
    pub bits: usize,
}

pub fn write_ber_csv(dir: &Path, rows: &[BerRow]) -> Result<()> {
    let path = dir.join("ber.csv");
    let mut out = String::from("N_d,T_b_s,errors,bits,ber\n");
    for r in rows {
        let ber = r.errors as f64 / r.bits as f64;
        out.push_str(&format!("{},{},{},{},{ber}\n", r.n_d, r.t_b, r.errors, r.bits));
    }
    fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    preset: Option<&str>,
    scenario: &Scenario,
    sample_offset: Option<f64>,
    decision_window: Option<f64>,
) -> Result<()> {
    let mut manifest = Manifest::new(command, preset, scenario);
    manifest.sample_offset_s = sample_offset;
    manifest.decision_window_s = decision_window;
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes a short plain-text report next to the CSVs.
pub fn write_report(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
