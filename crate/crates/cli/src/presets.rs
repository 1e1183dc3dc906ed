//! Built-in experiment presets.
//!
//! Each preset bundles a resolved scenario with the detection parameters the
//! experiment uses. The desk-scale defaults shrink ensemble sizes to what a
//! workstation handles in minutes; `--realizations` restores full scale.

use anyhow::{bail, Result};

use csk_core::geometry::{ChannelGeometry, Surface};
use csk_core::scenario::{library, InputSchedule, Scenario};
use csk_core::species::SpeciesId;
use csk_core::synthesis::{synthesize, CircuitLayout, Edge, NodeRef, SinkSpec, SourceSpec};
use csk_core::units::{hours, minutes, MOLECULES_PER_NM_UM3};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub scenario: Scenario,
    /// Decision sampling delay after each transmission (s).
    pub sample_offset: f64,
    /// Length of the count-integration window ending at the sample (s).
    pub decision_window: f64,
}

pub const PRESET_NAMES: [&str; 5] = ["fig9", "fig10", "fig11", "fig12", "fig13"];

fn base(layout: CircuitLayout, geometry: ChannelGeometry, schedule: InputSchedule) -> Scenario {
    Scenario {
        geometry,
        species: library::species_table(),
        repressor: library::repressor(),
        threshold_input: library::threshold_input(),
        exchange_rate: library::EXCHANGE_RATE,
        release_rate: library::RELEASE_RATE,
        reaction_rate: library::REACTION_RATE,
        production_scale: 1.0,
        layout,
        schedule,
        ts: 1.0,
        horizon: hours(4.0),
        reference_depth: library::REFERENCE_DEPTH,
        seed: 1,
        realizations: 200,
        particle_substeps: 100,
    }
}

/// Full channel of the quadruple-level link (stations L0..L9, lanes W0..W4).
fn quad_geometry() -> ChannelGeometry {
    ChannelGeometry {
        stations: vec![0.0, 1.0, 4.0, 39.0, 42.0, 43.0, 46.0, 47.0, 50.0, 55.0],
        lanes: vec![0.0, 2.5, 5.0, 10.0, 15.0],
        height: 3.0,
        cell_radius: 0.5,
        flow: 0.1,
    }
}

/// Binary link channel: a single 5 µm lane.
fn binary_geometry() -> ChannelGeometry {
    ChannelGeometry {
        stations: vec![0.0, 1.0, 4.0, 39.0, 42.0, 43.0],
        lanes: vec![0.0, 5.0],
        height: 3.0,
        cell_radius: 0.5,
        flow: 0.1,
    }
}

/// Propagation cross-validation: an impulse of 500 molecules released over
/// the active half of the wall, two detection strips 10 µm downstream.
pub fn fig9() -> Preset {
    let geometry = ChannelGeometry {
        stations: vec![0.0, 10.0],
        lanes: vec![0.0, 2.5, 5.0, 10.0, 15.0],
        height: 3.0,
        cell_radius: 0.5,
        flow: 0.1,
    };
    let carrier = SpeciesId::new(library::CARRIER);
    let layout = CircuitLayout {
        populations: vec![],
        sources: vec![SourceSpec {
            name: "src".into(),
            bit: 0,
            lane: Surface::new(0.0, 5.0).unwrap(),
            emit_x: 0.0,
            species: carrier.clone(),
        }],
        sinks: vec![
            SinkSpec {
                name: "near".into(),
                bit: 0,
                lane: Surface::new(0.0, 1.25).unwrap(),
                absorb_x: 10.0,
                species: carrier.clone(),
            },
            SinkSpec {
                name: "far".into(),
                bit: 0,
                lane: Surface::new(13.75, 15.0).unwrap(),
                absorb_x: 10.0,
                species: carrier,
            },
        ],
        edges: vec![
            Edge { from: NodeRef::Source(0), to: NodeRef::Sink(0) },
            Edge { from: NodeRef::Source(0), to: NodeRef::Sink(1) },
        ],
    };
    let source_volume = 5.0 * 3.0 * library::REFERENCE_DEPTH;
    let schedule = InputSchedule {
        symbols: vec![1],
        amplitude: 500.0 / (source_volume * MOLECULES_PER_NM_UM3),
        duration: 0.0,
        period: 60.0,
        start: 0.0,
    };
    let mut scenario = base(layout, geometry, schedule);
    scenario.ts = 0.25;
    scenario.horizon = 40.0;
    scenario.particle_substeps = 25;
    scenario.realizations = 20; // 20 × 500 = 1e4 particles
    Preset { name: "fig9", scenario, sample_offset: 0.0, decision_window: 1.0 }
}

/// Binary link end-to-end: 50 nM for 10 s at t = 1 h, threshold 0.01 nM.
pub fn fig10() -> Preset {
    let geometry = binary_geometry();
    let layout = synthesize(1, &geometry, &[0.01]).unwrap();
    let schedule = InputSchedule {
        symbols: vec![1],
        amplitude: 50.0,
        duration: 10.0,
        period: hours(5.0),
        start: hours(1.0),
    };
    let mut scenario = base(layout, geometry, schedule);
    scenario.ts = 1.0;
    scenario.horizon = hours(4.0);
    scenario.realizations = 200;
    scenario.particle_substeps = 100;
    Preset { name: "fig10", scenario, sample_offset: hours(2.0), decision_window: 3600.0 }
}

fn quad_scenario() -> Scenario {
    let geometry = quad_geometry();
    let layout = synthesize(2, &geometry, &[0.1, 0.45, 0.7]).unwrap();
    let schedule = InputSchedule {
        symbols: vec![3],
        amplitude: 50.0,
        duration: minutes(30.0),
        period: hours(10.0),
        start: hours(1.0),
    };
    let mut scenario = base(layout, geometry, schedule);
    scenario.production_scale = 40.0;
    scenario
}

/// Quadruple-level modulation: all four symbols, transmitter response only
/// matters, analytic engine.
pub fn fig11() -> Preset {
    let mut scenario = quad_scenario();
    scenario.ts = 0.1;
    scenario.horizon = hours(3.0);
    scenario.realizations = 50;
    Preset { name: "fig11", scenario, sample_offset: hours(5.0), decision_window: 3600.0 }
}

/// Quadruple-level demodulation: full cascade, decisions sampled 5 h after
/// transmission.
pub fn fig12() -> Preset {
    let mut scenario = quad_scenario();
    scenario.ts = 0.1;
    scenario.horizon = hours(7.0);
    scenario.realizations = 50;
    Preset { name: "fig12", scenario, sample_offset: hours(5.0), decision_window: 3600.0 }
}

/// Bit-error-rate sweep over the detection threshold, desk scale: 100-bit
/// random sequences on a 1 s grid.
pub fn fig13() -> Preset {
    let mut scenario = quad_scenario();
    scenario.ts = 1.0;
    scenario.horizon = hours(12.0); // extended per sequence length at run time
    scenario.seed = 42;
    Preset { name: "fig13", scenario, sample_offset: hours(5.0), decision_window: 3600.0 }
}

pub fn by_name(name: &str) -> Result<Preset> {
    match name {
        "fig9" => Ok(fig9()),
        "fig10" => Ok(fig10()),
        "fig11" => Ok(fig11()),
        "fig12" => Ok(fig12()),
        "fig13" => Ok(fig13()),
        other => bail!("unknown preset '{other}'; available: {PRESET_NAMES:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let p = by_name(name).unwrap();
            p.scenario.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn fig9_emits_500_molecules() {
        let p = fig9();
        let v = p.scenario.lane_volume(&p.scenario.layout.sources[0].lane);
        let n = p.scenario.schedule.amplitude * v * MOLECULES_PER_NM_UM3;
        assert!((n - 500.0).abs() < 1e-9);
    }
}
