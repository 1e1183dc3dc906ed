//! Scenario files: a TOML schema with explicit units on every dimensioned
//! quantity, and a JSON run manifest that reloads bit-identically.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use csk_core::geometry::ChannelGeometry;
use csk_core::scenario::{InputSchedule, Scenario};
use csk_core::species::{SpeciesId, SpeciesParams, SpeciesTable};
use csk_core::synthesis::synthesize;

use crate::units::{quantity, Dimension as D};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub geometry: RawGeometry,
    pub species: std::collections::BTreeMap<String, RawSpecies>,
    pub repressor: RawSpecies,
    pub threshold_input: RawThresholdInput,
    pub cells: RawCells,
    pub layout: RawLayout,
    pub input: RawInput,
    pub run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGeometry {
    pub stations: Vec<String>,
    pub lanes: Vec<String>,
    pub height: String,
    pub cell_radius: String,
    pub flow: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpecies {
    pub beta: String,
    pub theta: String,
    pub hill: f64,
    pub k_d: String,
    #[serde(default)]
    pub diffusion: Option<String>,
    #[serde(default)]
    pub wall_absorption: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThresholdInput {
    pub theta: String,
    pub hill: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCells {
    /// Dimensionless multiplier on absorbed amounts.
    pub exchange: f64,
    pub release: String,
    pub reaction: String,
    #[serde(default = "one")]
    pub production_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLayout {
    /// CSK order m; the layout is synthesized for it.
    pub order: usize,
    /// Threshold levels for B_0 .. B_{2^m − 2}.
    pub thresholds: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInput {
    pub symbols: Vec<u8>,
    pub amplitude: String,
    pub duration: String,
    pub period: String,
    pub start: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub ts: String,
    pub horizon: String,
    pub seed: u64,
    pub realizations: usize,
    pub particle_substeps: u32,
    pub reference_depth: String,
}

impl RawConfig {
    pub fn resolve(&self) -> Result<Scenario> {
        let stations = self
            .geometry
            .stations
            .iter()
            .map(|s| quantity(s, D::Length, "geometry.stations"))
            .collect::<Result<Vec<f64>>>()?;
        let lanes = self
            .geometry
            .lanes
            .iter()
            .map(|s| quantity(s, D::Length, "geometry.lanes"))
            .collect::<Result<Vec<f64>>>()?;
        let geometry = ChannelGeometry {
            stations,
            lanes,
            height: quantity(&self.geometry.height, D::Length, "geometry.height")?,
            cell_radius: quantity(&self.geometry.cell_radius, D::Length, "geometry.cell_radius")?,
            flow: quantity(&self.geometry.flow, D::Speed, "geometry.flow")?,
        };

        let mut species = SpeciesTable::new();
        for (name, raw) in &self.species {
            let p = raw.resolve(&format!("species.{name}"))?;
            species
                .insert(SpeciesId::new(name), p)
                .map_err(|e| anyhow!("species.{name}: {e}"))?;
        }
        let repressor = self.repressor.resolve("repressor")?;
        let threshold_input = SpeciesParams {
            beta: 0.0,
            theta: quantity(&self.threshold_input.theta, D::InverseConcentration, "threshold_input.theta")?,
            hill_n: self.threshold_input.hill,
            k_d: 0.0,
            diffusion: 0.0,
            wall_absorption: 0.0,
        };

        let thresholds = self
            .layout
            .thresholds
            .iter()
            .map(|s| quantity(s, D::Concentration, "layout.thresholds"))
            .collect::<Result<Vec<f64>>>()?;
        let layout = synthesize(self.layout.order, &geometry, &thresholds)
            .map_err(|e| anyhow!("layout: {e}"))?;

        let scenario = Scenario {
            geometry,
            species,
            repressor,
            threshold_input,
            exchange_rate: self.cells.exchange,
            release_rate: quantity(&self.cells.release, D::Rate, "cells.release")?,
            reaction_rate: quantity(&self.cells.reaction, D::SecondOrderRate, "cells.reaction")?,
            production_scale: self.cells.production_scale,
            layout,
            schedule: InputSchedule {
                symbols: self.input.symbols.clone(),
                amplitude: quantity(&self.input.amplitude, D::Concentration, "input.amplitude")?,
                duration: quantity(&self.input.duration, D::Time, "input.duration")?,
                period: quantity(&self.input.period, D::Time, "input.period")?,
                start: quantity(&self.input.start, D::Time, "input.start")?,
            },
            ts: quantity(&self.run.ts, D::Time, "run.ts")?,
            horizon: quantity(&self.run.horizon, D::Time, "run.horizon")?,
            reference_depth: quantity(&self.run.reference_depth, D::Length, "run.reference_depth")?,
            seed: self.run.seed,
            realizations: self.run.realizations,
            particle_substeps: self.run.particle_substeps,
        };
        scenario.validate().map_err(|e| anyhow!("invalid scenario: {e}"))?;
        Ok(scenario)
    }
}

impl RawSpecies {
    fn resolve(&self, field: &str) -> Result<SpeciesParams> {
        let p = SpeciesParams {
            beta: quantity(&self.beta, D::ConcentrationRate, &format!("{field}.beta"))?,
            theta: quantity(&self.theta, D::InverseConcentration, &format!("{field}.theta"))?,
            hill_n: self.hill,
            k_d: quantity(&self.k_d, D::Rate, &format!("{field}.k_d"))?,
            diffusion: self
                .diffusion
                .as_ref()
                .map(|s| quantity(s, D::Diffusivity, &format!("{field}.diffusion")))
                .transpose()?
                .unwrap_or(0.0),
            wall_absorption: self
                .wall_absorption
                .as_ref()
                .map(|s| quantity(s, D::Speed, &format!("{field}.wall_absorption")))
                .transpose()?
                .unwrap_or(0.0),
        };
        p.validate().map_err(|e| anyhow!("{field}: {e}"))?;
        Ok(p)
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub tool_version: String,
    pub command: String,
    pub preset: Option<String>,
    pub sample_offset_s: Option<f64>,
    pub decision_window_s: Option<f64>,
    pub scenario: Scenario,
}

impl Manifest {
    pub fn new(command: &str, preset: Option<&str>, scenario: &Scenario) -> Manifest {
        Manifest {
            kind: "csksim-manifest".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            preset: preset.map(|s| s.to_string()),
            sample_offset_s: None,
            decision_window_s: None,
            scenario: scenario.clone(),
        }
    }
}

/// Loads a scenario from a TOML config or a JSON manifest.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json")
        || text.trim_start().starts_with('{')
    {
        let manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        if manifest.kind != "csksim-manifest" {
            bail!("{} is not a csksim manifest", path.display());
        }
        manifest
            .scenario
            .validate()
            .map_err(|e| anyhow!("invalid scenario in manifest: {e}"))?;
        Ok(manifest.scenario)
    } else {
        let raw: RawConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        raw.resolve()
    }
}
