//! Resolved, validated description of one run, shared by the analytic and
//! stochastic engines. File parsing lives in the CLI crate; by the time a
//! `Scenario` exists every quantity is in canonical units.

use alloc::format;
use alloc::vec::Vec;

use crate::geometry::{ChannelGeometry, Surface};
use crate::kinetics::{BlockKind, CellBlockConfig, HillActivation, Repression};
use crate::species::{SpeciesParams, SpeciesTable};
use crate::synthesis::{CircuitLayout, Population};
use crate::trace::SignalTrace;
use crate::{Error, Result};

/// Bit pattern transmitted as rectangular molecule releases.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputSchedule {
    /// Symbol sequence; bit `b` of `symbols[k]` drives source line `b`.
    pub symbols: Vec<u8>,
    /// Total released amount per active bit and symbol (nM).
    pub amplitude: f64,
    /// Release duration (s); zero means an impulse.
    pub duration: f64,
    /// Symbol interval T_b (s).
    pub period: f64,
    /// Time of the first symbol (s).
    pub start: f64,
}

impl InputSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.symbols.is_empty() {
            return Err(Error::Config("input schedule has no symbols".into()));
        }
        if !(self.amplitude >= 0.0) || !(self.duration >= 0.0) || !(self.start >= 0.0) {
            return Err(Error::Config("schedule quantities must be non-negative".into()));
        }
        if self.symbols.len() > 1 && !(self.period > 0.0) {
            return Err(Error::Config("symbol interval must be positive".into()));
        }
        Ok(())
    }

    /// Release trace for one source line: per-interval released amount (nM).
    pub fn source_trace(&self, bit: usize, ts: f64, len: usize) -> Result<SignalTrace> {
        let mut trace = SignalTrace::zeros(0.0, ts, len)?;
        for (k, &sym) in self.symbols.iter().enumerate() {
            if (sym >> bit) & 1 == 0 {
                continue;
            }
            let w0 = self.start + k as f64 * self.period;
            if self.duration == 0.0 {
                let idx = (w0 / ts) as usize;
                if idx < len {
                    trace.values_mut()[idx] += self.amplitude;
                }
                continue;
            }
            let w1 = w0 + self.duration;
            let first = (w0 / ts) as usize;
            let last = libm::ceil(w1 / ts) as usize;
            for j in first..last.min(len) {
                let lo = (j as f64 * ts).max(w0);
                let hi = ((j + 1) as f64 * ts).min(w1);
                if hi > lo {
                    trace.values_mut()[j] += self.amplitude * (hi - lo) / self.duration;
                }
            }
        }
        Ok(trace)
    }

    /// Largest bit index any symbol uses.
    pub fn bits(&self) -> usize {
        let max = self.symbols.iter().copied().max().unwrap_or(0);
        (8 - max.leading_zeros() as usize).max(1)
    }
}

/// Everything both engines need for one run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub geometry: ChannelGeometry,
    pub species: SpeciesTable,
    /// Constants of the repressor protein (production rate, repression
    /// binding, decay).
    pub repressor: SpeciesParams,
    /// Constants governing repressor induction by the threshold molecules.
    pub threshold_input: SpeciesParams,
    /// Exchange rate η; absorbed amounts enter cells scaled by it.
    pub exchange_rate: f64,
    /// Release rate ξ (1/s).
    pub release_rate: f64,
    /// Bimolecular input-repressor rate k_f (1/(nM·s)).
    pub reaction_rate: f64,
    /// Multiplier on every production rate (amplifying circuits).
    pub production_scale: f64,
    pub layout: CircuitLayout,
    pub schedule: InputSchedule,
    /// Sampling step t_s (s).
    pub ts: f64,
    /// Run horizon (s).
    pub horizon: f64,
    /// Effective channel depth (µm) realizing the molecule-count anchor;
    /// lane volumes are width × height × depth.
    pub reference_depth: f64,
    pub seed: u64,
    pub realizations: usize,
    /// Particle sub-steps per sampling interval.
    pub particle_substeps: u32,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.layout.validate()?;
        self.schedule.validate()?;
        self.repressor.validate()?;
        self.threshold_input.validate()?;
        if !(self.ts > 0.0) || !(self.horizon >= self.ts) {
            return Err(Error::Config("need ts > 0 and horizon >= ts".into()));
        }
        if !(self.exchange_rate > 0.0) || !(self.release_rate > 0.0) {
            return Err(Error::Config("exchange and release rates must be positive".into()));
        }
        if !(self.reaction_rate >= 0.0) || !(self.production_scale > 0.0) {
            return Err(Error::Config("reaction rate and production scale must be valid".into()));
        }
        if !(self.reference_depth > 0.0) {
            return Err(Error::Config("reference depth must be positive".into()));
        }
        if self.realizations == 0 || self.particle_substeps == 0 {
            return Err(Error::Config("need at least one realization and sub-step".into()));
        }
        for p in &self.layout.populations {
            self.species.get(&p.input)?;
            self.species.get(&p.output)?;
        }
        for s in &self.layout.sources {
            self.species.get(&s.species)?;
            if s.bit as u32 >= 8 {
                return Err(Error::Config("source bit index out of range".into()));
            }
        }
        for s in &self.layout.sinks {
            self.species.get(&s.species)?;
        }
        let width = self.geometry.width();
        let eps = 1e-9 * width;
        for p in &self.layout.populations {
            if p.lane.y_hi > width + eps {
                return Err(Error::Config(format!(
                    "population {} lane exceeds the channel width",
                    p.name
                )));
            }
        }
        Ok(())
    }

    /// Number of grid intervals covering the horizon.
    pub fn grid_len(&self) -> usize {
        libm::ceil(self.horizon / self.ts) as usize
    }

    /// Lane volume (µm³) used for molecule counting.
    pub fn lane_volume(&self, lane: &Surface) -> f64 {
        self.geometry.lane_volume(lane, self.reference_depth)
    }

    /// Resolves the numeric block configuration of a population.
    ///
    /// Constants are drawn from the table by role: each production stage
    /// takes β and k_d from the molecule it produces (output species, or the
    /// repressor), and each Hill takes θ and n from the molecule doing the
    /// regulating (the inducing input, the threshold molecule, or the
    /// repressor).
    pub fn block_config(&self, pop: &Population) -> Result<CellBlockConfig> {
        let input = self.species.get(&pop.input)?;
        let output = self.species.get(&pop.output)?;
        let scale = self.production_scale;
        let cfg = match pop.kind {
            BlockKind::Id => CellBlockConfig {
                kind: BlockKind::Id,
                eta: self.exchange_rate,
                input_decay: input.k_d,
                drive: HillActivation {
                    rate: scale * output.beta,
                    theta: input.theta,
                    n: input.hill_n,
                },
                repression: None,
                repressor_decay: 0.0,
                reaction_rate: 0.0,
                output_rate: scale * output.beta,
                output_decay: output.k_d,
                release_rate: self.release_rate,
                gain: pop.gain,
            },
            BlockKind::Not => CellBlockConfig {
                kind: BlockKind::Not,
                eta: self.exchange_rate,
                input_decay: input.k_d,
                drive: HillActivation {
                    rate: scale * self.repressor.beta,
                    theta: input.theta,
                    n: input.hill_n,
                },
                repression: Some(Repression {
                    theta: self.repressor.theta,
                    n: self.repressor.hill_n,
                }),
                repressor_decay: self.repressor.k_d,
                reaction_rate: 0.0,
                output_rate: scale * output.beta,
                output_decay: output.k_d,
                release_rate: self.release_rate,
                gain: pop.gain,
            },
            BlockKind::Threshold => CellBlockConfig {
                kind: BlockKind::Threshold,
                eta: self.exchange_rate,
                input_decay: input.k_d,
                drive: HillActivation {
                    rate: scale * self.repressor.beta,
                    theta: self.threshold_input.theta,
                    n: self.threshold_input.hill_n,
                },
                repression: Some(Repression {
                    theta: self.repressor.theta,
                    n: self.repressor.hill_n,
                }),
                repressor_decay: self.repressor.k_d,
                reaction_rate: self.reaction_rate,
                output_rate: scale * output.beta,
                output_decay: output.k_d,
                release_rate: self.release_rate,
                gain: pop.gain,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub mod library {
    //! Bundled constants of the reusable engineered-cell library and its
    //! three wiring molecules.

    use super::*;
    use crate::species::SpeciesId;
    use crate::units::per_minute;

    pub const INPUT_FACTOR: &str = "aCa";
    pub const CARRIER: &str = "DOX";
    pub const RELAY_FACTOR: &str = "aSc";

    /// Diffusion coefficient of the wiring molecules (µm²/s).
    pub const DIFFUSION: f64 = 89.0;
    /// Wall absorption rate of a receiving cell column (µm/s).
    pub const WALL_ABSORPTION: f64 = 9.0;
    /// Release rate ξ (1/s).
    pub const RELEASE_RATE: f64 = 20.0;
    /// Input-repressor reaction rate k_f (1/(nM·s)).
    pub const REACTION_RATE: f64 = 1.0;
    /// Exchange rate η (dimensionless multiplier on absorbed amounts).
    pub const EXCHANGE_RATE: f64 = 1.0;
    /// Effective channel depth (µm) anchoring 50 nM ≡ 750 molecules in a
    /// 5 µm × 3 µm lane cross-section: 750/(50 nM · N_A · 15 µm²).
    pub const REFERENCE_DEPTH: f64 =
        750.0 / (50.0 * crate::units::MOLECULES_PER_NM_UM3 * 15.0);

    pub fn input_factor() -> SpeciesParams {
        SpeciesParams {
            beta: per_minute(0.0369),
            theta: 0.26,
            hill_n: 0.9,
            k_d: per_minute(0.05),
            diffusion: DIFFUSION,
            wall_absorption: WALL_ABSORPTION,
        }
    }

    pub fn carrier() -> SpeciesParams {
        SpeciesParams {
            beta: per_minute(0.162),
            theta: 0.167,
            hill_n: 1.2,
            k_d: per_minute(0.023),
            diffusion: DIFFUSION,
            wall_absorption: WALL_ABSORPTION,
        }
    }

    pub fn relay_factor() -> SpeciesParams {
        carrier()
    }

    /// The repressor protein stays inside the cell; θ is large, so traces of
    /// it already shut a promoter down.
    pub fn repressor() -> SpeciesParams {
        SpeciesParams {
            beta: per_minute(0.615),
            theta: 1550.0,
            hill_n: 2.0,
            k_d: per_minute(0.15),
            diffusion: 0.0,
            wall_absorption: 0.0,
        }
    }

    /// Dose-response constants of the threshold molecules; modelled on the
    /// generic carrier molecule.
    pub fn threshold_input() -> SpeciesParams {
        carrier()
    }

    pub fn species_table() -> SpeciesTable {
        let mut t = SpeciesTable::new();
        t.insert(SpeciesId::new(INPUT_FACTOR), input_factor()).expect("fresh table");
        t.insert(SpeciesId::new(CARRIER), carrier()).expect("fresh table");
        t.insert(SpeciesId::new(RELAY_FACTOR), relay_factor()).expect("fresh table");
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::concentration_to_count;

    #[test]
    fn reference_depth_reproduces_the_count_anchor() {
        // 50 nM in a 5 µm wide, 3 µm high lane at the reference depth is 750
        // molecules.
        let v = 5.0 * 3.0 * library::REFERENCE_DEPTH;
        let n = concentration_to_count(50.0, v).unwrap();
        assert!((n - 750.0).abs() < 1e-3, "n = {n}");
    }

    #[test]
    fn rectangle_source_trace_conserves_amplitude() {
        let s = InputSchedule {
            symbols: alloc::vec![1],
            amplitude: 50.0,
            duration: 10.0,
            period: 3600.0,
            start: 5.0,
        };
        let t = s.source_trace(0, 0.7, 100).unwrap();
        assert!((t.total() - 50.0).abs() < 1e-9);
        // Inactive bit line stays silent.
        let z = s.source_trace(1, 0.7, 100).unwrap();
        assert_eq!(z.total(), 0.0);
    }

    #[test]
    fn impulse_schedule_lands_in_one_bin() {
        let s = InputSchedule {
            symbols: alloc::vec![1],
            amplitude: 33.0,
            duration: 0.0,
            period: 1.0,
            start: 0.26,
        };
        let t = s.source_trace(0, 0.25, 8).unwrap();
        assert_eq!(t.values()[1], 33.0);
        assert!((t.total() - 33.0).abs() < 1e-12);
    }

    #[test]
    fn multi_symbol_bits() {
        let s = InputSchedule {
            symbols: alloc::vec![0, 3, 2],
            amplitude: 1.0,
            duration: 4.0,
            period: 100.0,
            start: 0.0,
        };
        assert_eq!(s.bits(), 2);
        let b0 = s.source_trace(0, 1.0, 300).unwrap();
        let b1 = s.source_trace(1, 1.0, 300).unwrap();
        assert!((b0.total() - 1.0).abs() < 1e-12);
        assert!((b1.total() - 2.0).abs() < 1e-12);
        assert!(b0.values()[100] > 0.0 && b0.values()[0] == 0.0);
    }
}
