//! Agent-based Monte-Carlo engine.
//!
//! Each propagation leg of a layout becomes an independent channel segment
//! [0, L] × [0, W] × [0, H]: reflective walls everywhere except the
//! receiving cell column at x = L, where a contacting particle is absorbed
//! with probability k_a·sqrt(π·Δt/D) (the first-order Brownian
//! discretization of the partially absorbing boundary). Receiving
//! populations tile their lane in strips of one cell diameter; every strip
//! runs its own kinetics block, so a strip far from the emitting lane sees
//! molecules later and reacts later — the effect a single well-mixed agent
//! cannot capture.
//!
//! Particle moves use one RNG stream per realization, seeded explicitly, and
//! all bookkeeping is integer-exact: emitted = alive + degraded + absorbed
//! holds after every step and is audited continuously.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::Surface;
use crate::kinetics::CellBlock;
use crate::scenario::Scenario;
use crate::species::SpeciesId;
use crate::synthesis::NodeRef;
use crate::trace::SignalTrace;
use crate::units::MOLECULES_PER_NM_UM3;
use crate::{Error, Result};

/// One diffusing molecule. The species is a property of the leg holding the
/// particle; `alive` flips only transiently while a step resolves its fate.
#[derive(Debug, Clone, Copy)]
pub struct ParticleState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alive: bool,
}

/// Transport constants of one channel segment.
#[derive(Debug, Clone, Copy)]
pub struct TransportParams {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub flow: f64,
    pub diffusion: f64,
    pub decay: f64,
    /// Absorption probability per wall contact.
    pub absorb_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParticleFate {
    Alive,
    Degraded,
    /// Absorbed on the x = L wall at this y position.
    Absorbed { y: f64 },
}

/// Reflects `v` into [0, hi] by repeated folding.
fn fold(mut v: f64, hi: f64) -> f64 {
    if hi <= 0.0 {
        return 0.0;
    }
    for _ in 0..64 {
        if v < 0.0 {
            v = -v;
        } else if v > hi {
            v = 2.0 * hi - v;
        } else {
            return v;
        }
    }
    // Pathological displacement (far beyond any physical step); pin inside.
    let r = libm::fmod(v, hi);
    if r < 0.0 {
        r + hi
    } else {
        r
    }
}

/// Advances one particle by `dt`: Gaussian displacement plus drift, specular
/// reflection at the channel walls and x = 0, absorption trials at each
/// x = L contact, then a degradation trial for survivors.
pub fn step_particle(
    p: &mut ParticleState,
    params: &TransportParams,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> ParticleFate {
    let sigma = libm::sqrt(2.0 * params.diffusion * dt);
    let dx: f64 = params.flow * dt + sigma * rng.sample::<f64, _>(StandardNormal);
    let dy: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
    let dz: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
    p.y = fold(p.y + dy, params.width);
    p.z = fold(p.z + dz, params.height);

    let mut x = p.x + dx;
    let mut contacts = 0;
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > params.length {
            if rng.random::<f64>() < params.absorb_probability {
                p.alive = false;
                return ParticleFate::Absorbed { y: p.y };
            }
            x = 2.0 * params.length - x;
        } else {
            break;
        }
        contacts += 1;
        if contacts > 64 {
            x = fold(x, params.length);
            break;
        }
    }
    p.x = x;

    if params.decay > 0.0 {
        let death = 1.0 - libm::exp(-params.decay * dt);
        if rng.random::<f64>() < death {
            p.alive = false;
            return ParticleFate::Degraded;
        }
    }
    ParticleFate::Alive
}

/// Integer particle accounting, aggregated over all legs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CensusReport {
    pub emitted: u64,
    pub alive: u64,
    pub degraded: u64,
    pub absorbed_credited: u64,
    pub absorbed_wall: u64,
    /// Steps on which emitted != alive + degraded + absorbed. Zero on every
    /// sound run.
    pub violations: u64,
}

#[derive(Debug, Clone, Copy)]
enum WallTarget {
    Agent(usize),
    Sink(usize),
}

#[derive(Debug, Clone, Copy)]
struct WallZone {
    y_lo: f64,
    y_hi: f64,
    target: WallTarget,
}

struct Leg {
    params: TransportParams,
    particles: Vec<ParticleState>,
    zones: Vec<WallZone>,
    emitted: u64,
    degraded: u64,
    absorbed_credited: u64,
    absorbed_wall: u64,
}

struct Agent {
    population: usize,
    y_lo: f64,
    y_hi: f64,
    volume: f64,
    block: CellBlock,
    threshold_level: f64,
    out_leg: Option<usize>,
    residual: f64,
    absorbed_count: u64,
}

struct SourceFeed {
    leg: usize,
    lane: Surface,
    /// Expected molecule emissions per interval.
    expectation: Vec<f64>,
    residual: f64,
}

/// Per-realization traces, in molecule counts per interval.
#[derive(Debug, Clone)]
pub struct RealizationOutput {
    /// Molecules released into the channel by each population.
    pub released: BTreeMap<String, Vec<f64>>,
    /// Molecules absorbed by each detection wall.
    pub sinks: BTreeMap<String, Vec<f64>>,
    pub census: CensusReport,
}

/// Deterministic per-realization seed derivation.
pub fn realization_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

struct Engine {
    legs: Vec<Leg>,
    agents: Vec<Agent>,
    sources: Vec<SourceFeed>,
    sink_names: Vec<String>,
    pop_names: Vec<String>,
    substeps: u32,
    ts: f64,
    grid_len: usize,
}

fn leg_key(emit_x: f64, absorb_x: f64, species: &SpeciesId) -> (u64, u64, SpeciesId) {
    (emit_x.to_bits(), absorb_x.to_bits(), species.clone())
}

impl Engine {
    fn build(scenario: &Scenario) -> Result<Engine> {
        scenario.validate()?;
        let layout = &scenario.layout;
        let ts = scenario.ts;
        let substeps = scenario.particle_substeps;
        let dt = ts / substeps as f64;
        let grid_len = scenario.grid_len();
        let width = scenario.geometry.width();
        let height = scenario.geometry.height;

        let mut leg_index: BTreeMap<(u64, u64, SpeciesId), usize> = BTreeMap::new();
        let mut legs: Vec<Leg> = Vec::new();
        for e in &layout.edges {
            let geom = layout.edge_geometry(e)?;
            let (emit_x, absorb_x) = match (e.from, e.to) {
                (NodeRef::Source(i), _) => (layout.sources[i].emit_x, target_x(layout, e.to)),
                (NodeRef::Population(i), _) => {
                    (layout.populations[i].emit_x, target_x(layout, e.to))
                }
                _ => unreachable!("validated layout"),
            };
            let key = leg_key(emit_x, absorb_x, &geom.species);
            if leg_index.contains_key(&key) {
                continue;
            }
            let sp = scenario.species.get(&geom.species)?;
            if !(sp.diffusion > 0.0) {
                return Err(Error::Config(format!(
                    "species {} cannot propagate without diffusion",
                    geom.species
                )));
            }
            let p_a = sp.wall_absorption * libm::sqrt(core::f64::consts::PI * dt / sp.diffusion);
            if p_a > 1.0 {
                log::warn!(
                    "wall absorption probability {p_a:.3} clamped to 1; use more sub-steps"
                );
            }
            leg_index.insert(key, legs.len());
            legs.push(Leg {
                params: TransportParams {
                    length: absorb_x - emit_x,
                    width,
                    height,
                    flow: scenario.geometry.flow,
                    diffusion: sp.diffusion,
                    decay: sp.k_d,
                    absorb_probability: p_a.min(1.0),
                },
                particles: Vec::new(),
                zones: Vec::new(),
                emitted: 0,
                degraded: 0,
                absorbed_credited: 0,
                absorbed_wall: 0,
            });
        }

        // Outgoing leg per population: all out-edges must share one wall.
        let mut out_leg: Vec<Option<usize>> = alloc::vec![None; layout.populations.len()];
        for (pi, p) in layout.populations.iter().enumerate() {
            let mut found: Option<usize> = None;
            for e in &layout.edges {
                if e.from != NodeRef::Population(pi) {
                    continue;
                }
                let geom = layout.edge_geometry(e)?;
                let key = leg_key(p.emit_x, target_x(layout, e.to), &geom.species);
                let leg = *leg_index.get(&key).expect("legs cover all edges");
                match found {
                    None => found = Some(leg),
                    Some(prev) if prev == leg => {}
                    Some(_) => {
                        return Err(Error::Config(format!(
                            "population {} releases toward more than one wall",
                            p.name
                        )))
                    }
                }
            }
            out_leg[pi] = found;
        }

        // Agents: strips of one cell diameter per receiving population.
        let cell_diameter = (2.0 * scenario.geometry.cell_radius).max(1e-6);
        let mut agents: Vec<Agent> = Vec::new();
        for (pi, p) in layout.populations.iter().enumerate() {
            let cfg = scenario.block_config(p)?;
            let lane_w = p.lane.width();
            let n_strips = libm::round(lane_w / cell_diameter).max(1.0) as usize;
            let strip_w = lane_w / n_strips as f64;
            let strip_volume = strip_w * height * scenario.reference_depth;
            // Register the strips on every leg whose wall this population
            // occupies.
            let mut wall_legs: Vec<usize> = Vec::new();
            for e in &layout.edges {
                if e.to != NodeRef::Population(pi) {
                    continue;
                }
                let geom = layout.edge_geometry(e)?;
                let emit_x = match e.from {
                    NodeRef::Source(i) => layout.sources[i].emit_x,
                    NodeRef::Population(i) => layout.populations[i].emit_x,
                    NodeRef::Sink(_) => unreachable!(),
                };
                let key = leg_key(emit_x, p.absorb_x, &geom.species);
                let leg = *leg_index.get(&key).expect("legs cover all edges");
                if !wall_legs.contains(&leg) {
                    wall_legs.push(leg);
                }
            }
            for s in 0..n_strips {
                let idx = agents.len();
                agents.push(Agent {
                    population: pi,
                    y_lo: p.lane.y_lo + s as f64 * strip_w,
                    y_hi: p.lane.y_lo + (s + 1) as f64 * strip_w,
                    volume: strip_volume,
                    block: CellBlock::new(cfg, ts)?,
                    threshold_level: p.threshold_level.unwrap_or(0.0),
                    out_leg: out_leg[pi],
                    residual: 0.0,
                    absorbed_count: 0,
                });
                for &leg in &wall_legs {
                    legs[leg].zones.push(WallZone {
                        y_lo: agents[idx].y_lo,
                        y_hi: agents[idx].y_hi,
                        target: WallTarget::Agent(idx),
                    });
                }
            }
        }
        for (si, sink) in layout.sinks.iter().enumerate() {
            for e in &layout.edges {
                if e.to != NodeRef::Sink(si) {
                    continue;
                }
                let geom = layout.edge_geometry(e)?;
                let emit_x = match e.from {
                    NodeRef::Source(i) => layout.sources[i].emit_x,
                    NodeRef::Population(i) => layout.populations[i].emit_x,
                    NodeRef::Sink(_) => unreachable!(),
                };
                let key = leg_key(emit_x, sink.absorb_x, &geom.species);
                let leg = *leg_index.get(&key).expect("legs cover all edges");
                let zone = WallZone {
                    y_lo: sink.lane.y_lo,
                    y_hi: sink.lane.y_hi,
                    target: WallTarget::Sink(si),
                };
                let exists = legs[leg].zones.iter().any(|z| {
                    matches!(z.target, WallTarget::Sink(s) if s == si)
                });
                if !exists {
                    legs[leg].zones.push(zone);
                }
            }
        }
        for leg in &mut legs {
            leg.zones.sort_by(|a, b| a.y_lo.partial_cmp(&b.y_lo).expect("finite bounds"));
        }

        // Source feeds.
        let mut sources = Vec::new();
        for (si, src) in layout.sources.iter().enumerate() {
            let trace = scenario.schedule.source_trace(src.bit, ts, grid_len)?;
            let volume = scenario.lane_volume(&src.lane);
            let expectation: Vec<f64> = trace
                .values()
                .iter()
                .map(|&nm| nm * volume * MOLECULES_PER_NM_UM3)
                .collect();
            // The source's leg: where its single out-edge points.
            let mut leg = None;
            for e in &layout.edges {
                if e.from == NodeRef::Source(si) {
                    let geom = layout.edge_geometry(e)?;
                    let key = leg_key(src.emit_x, target_x(layout, e.to), &geom.species);
                    leg = Some(*leg_index.get(&key).expect("legs cover all edges"));
                    break;
                }
            }
            let leg =
                leg.ok_or_else(|| Error::Wiring(format!("source {} feeds nothing", src.name)))?;
            sources.push(SourceFeed { leg, lane: src.lane, expectation, residual: 0.0 });
        }

        Ok(Engine {
            legs,
            agents,
            sources,
            sink_names: layout.sinks.iter().map(|s| s.name.clone()).collect(),
            pop_names: layout.populations.iter().map(|p| p.name.clone()).collect(),
            substeps,
            ts,
            grid_len,
        })
    }

    fn run(mut self, seed: u64) -> RealizationOutput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Dither the emission quantizers: a uniform initial carry decorrelates
        // the floor-and-carry release phases across realizations, so ensemble
        // means of sub-molecule release rates stay unbiased.
        for agent in &mut self.agents {
            agent.residual = rng.random::<f64>();
        }
        for src in &mut self.sources {
            src.residual = rng.random::<f64>();
        }
        let dt = self.ts / self.substeps as f64;
        let n = self.grid_len;
        let mut released: Vec<Vec<f64>> =
            self.pop_names.iter().map(|_| alloc::vec![0.0; n]).collect();
        let mut sink_bins: Vec<Vec<f64>> =
            self.sink_names.iter().map(|_| alloc::vec![0.0; n]).collect();
        let mut violations = 0u64;

        for k in 0..n {
            // Sources release this interval's molecules, spread over the
            // sub-steps.
            for _ in 0..self.substeps {
                for src in &mut self.sources {
                    let share = src.expectation[k] / self.substeps as f64 + src.residual;
                    let emit = libm::floor(share) as u64;
                    src.residual = share - emit as f64;
                    let leg = &mut self.legs[src.leg];
                    for _ in 0..emit {
                        let y = src.lane.y_lo + rng.random::<f64>() * src.lane.width();
                        let z = rng.random::<f64>() * leg.params.height;
                        leg.particles.push(ParticleState { x: 0.0, y, z, alive: true });
                        leg.emitted += 1;
                    }
                }
                // Transport.
                for leg in &mut self.legs {
                    let params = leg.params;
                    let mut i = 0;
                    while i < leg.particles.len() {
                        let fate = step_particle(&mut leg.particles[i], &params, dt, &mut rng);
                        match fate {
                            ParticleFate::Alive => i += 1,
                            ParticleFate::Degraded => {
                                leg.degraded += 1;
                                leg.particles.swap_remove(i);
                            }
                            ParticleFate::Absorbed { y } => {
                                let mut credited = false;
                                for z in &leg.zones {
                                    if y >= z.y_lo && y < z.y_hi {
                                        match z.target {
                                            WallTarget::Agent(a) => {
                                                self.agents[a].absorbed_count += 1
                                            }
                                            WallTarget::Sink(s) => sink_bins[s][k] += 1.0,
                                        }
                                        credited = true;
                                        break;
                                    }
                                }
                                if credited {
                                    leg.absorbed_credited += 1;
                                } else {
                                    leg.absorbed_wall += 1;
                                }
                                leg.particles.swap_remove(i);
                            }
                        }
                    }
                }
            }

            // Agents convert this interval's absorbed molecules, advance
            // their kinetics and release the produced molecules downstream.
            for a in 0..self.agents.len() {
                let count = core::mem::take(&mut self.agents[a].absorbed_count);
                let agent = &mut self.agents[a];
                let absorbed_nm = count as f64 / (agent.volume * MOLECULES_PER_NM_UM3);
                let net_nm = agent.block.step_unchecked(absorbed_nm, agent.threshold_level);
                let expect = net_nm * agent.volume * MOLECULES_PER_NM_UM3 + agent.residual;
                let emit = libm::floor(expect).max(0.0) as u64;
                agent.residual = expect - emit as f64;
                released[agent.population][k] += emit as f64;
                if let Some(li) = agent.out_leg {
                    let (y_lo, y_hi) = (agent.y_lo, agent.y_hi);
                    let leg = &mut self.legs[li];
                    for _ in 0..emit {
                        let y = y_lo + rng.random::<f64>() * (y_hi - y_lo);
                        let z = rng.random::<f64>() * leg.params.height;
                        leg.particles.push(ParticleState { x: 0.0, y, z, alive: true });
                        leg.emitted += 1;
                    }
                }
            }

            // Census audit: exact integer balance per leg, every interval.
            for leg in &self.legs {
                let balance = leg.particles.len() as u64
                    + leg.degraded
                    + leg.absorbed_credited
                    + leg.absorbed_wall;
                if balance != leg.emitted {
                    violations += 1;
                }
            }
        }

        let mut census = CensusReport::default();
        for leg in &self.legs {
            census.emitted += leg.emitted;
            census.alive += leg.particles.len() as u64;
            census.degraded += leg.degraded;
            census.absorbed_credited += leg.absorbed_credited;
            census.absorbed_wall += leg.absorbed_wall;
        }
        census.violations = violations;

        RealizationOutput {
            released: self.pop_names.into_iter().zip(released).collect(),
            sinks: self.sink_names.into_iter().zip(sink_bins).collect(),
            census,
        }
    }
}

fn target_x(layout: &crate::synthesis::CircuitLayout, to: NodeRef) -> f64 {
    match to {
        NodeRef::Population(i) => layout.populations[i].absorb_x,
        NodeRef::Sink(i) => layout.sinks[i].absorb_x,
        NodeRef::Source(_) => unreachable!("validated layout"),
    }
}

/// Runs one seeded realization.
pub fn run_realization(scenario: &Scenario, seed: u64) -> Result<RealizationOutput> {
    Ok(Engine::build(scenario)?.run(seed))
}

/// Mean and standard error across realizations, per series and interval.
#[derive(Debug, Clone, Default)]
pub struct EnsembleStats {
    pub n: usize,
    /// name -> (mean, standard error), both in molecules per interval.
    pub released: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    pub sinks: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    pub census: CensusReport,
}

impl EnsembleStats {
    /// Converts a count series to concentration (nM per interval) given the
    /// owning lane volume.
    pub fn counts_to_concentration(series: &[f64], volume: f64) -> Vec<f64> {
        series.iter().map(|c| c / (volume * MOLECULES_PER_NM_UM3)).collect()
    }
}

/// Streaming mean/variance accumulator fed in realization order.
#[derive(Debug, Default)]
pub struct EnsembleAccumulator {
    n: usize,
    released: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    sinks: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    census: CensusReport,
}

impl EnsembleAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: &RealizationOutput) {
        self.n += 1;
        let n = self.n as f64;
        let fold = |dst: &mut BTreeMap<String, (Vec<f64>, Vec<f64>)>,
                        src: &BTreeMap<String, Vec<f64>>| {
            for (name, series) in src {
                let entry = dst
                    .entry(name.clone())
                    .or_insert_with(|| (alloc::vec![0.0; series.len()], alloc::vec![0.0; series.len()]));
                for (i, &x) in series.iter().enumerate() {
                    // Welford update.
                    let delta = x - entry.0[i];
                    entry.0[i] += delta / n;
                    entry.1[i] += delta * (x - entry.0[i]);
                }
            }
        };
        fold(&mut self.released, &r.released);
        fold(&mut self.sinks, &r.sinks);
        self.census.emitted += r.census.emitted;
        self.census.alive += r.census.alive;
        self.census.degraded += r.census.degraded;
        self.census.absorbed_credited += r.census.absorbed_credited;
        self.census.absorbed_wall += r.census.absorbed_wall;
        self.census.violations += r.census.violations;
    }

    pub fn finish(self) -> EnsembleStats {
        let n = self.n;
        let to_stats = |src: BTreeMap<String, (Vec<f64>, Vec<f64>)>| {
            src.into_iter()
                .map(|(name, (mean, m2))| {
                    let se: Vec<f64> = m2
                        .iter()
                        .map(|&v| {
                            if n > 1 {
                                libm::sqrt(v / ((n - 1) as f64 * n as f64))
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    (name, (mean, se))
                })
                .collect()
        };
        EnsembleStats {
            n,
            released: to_stats(self.released),
            sinks: to_stats(self.sinks),
            census: self.census,
        }
    }
}

/// Sequential ensemble runner; realizations are independently seeded, so
/// callers may also fan them out across threads and push results in index
/// order.
pub fn run_realizations(scenario: &Scenario, n: usize, seed: u64) -> Result<EnsembleStats> {
    if n == 0 {
        return Err(Error::Domain("need at least one realization"));
    }
    let mut acc = EnsembleAccumulator::new();
    for r in 0..n {
        let out = run_realization(scenario, realization_seed(seed, r))?;
        acc.push(&out);
    }
    Ok(acc.finish())
}

/// Turns a count series into a [`SignalTrace`] of per-interval
/// concentrations.
pub fn counts_as_trace(series: &[f64], volume: f64, ts: f64) -> Result<SignalTrace> {
    SignalTrace::new(
        0.0,
        ts,
        series.iter().map(|c| c / (volume * MOLECULES_PER_NM_UM3)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn big_box(d: f64, u: f64, kd: f64) -> TransportParams {
        TransportParams {
            length: 1e6,
            width: 1e6,
            height: 1e6,
            flow: u,
            diffusion: d,
            decay: kd,
            absorb_probability: 0.0,
        }
    }

    #[test]
    fn frozen_dynamics_leave_particles_in_place() {
        let params = big_box(0.0, 0.0, 0.0);
        let mut r = rng(1);
        let mut p = ParticleState { x: 500.0, y: 500.0, z: 500.0, alive: true };
        for _ in 0..100 {
            assert_eq!(step_particle(&mut p, &params, 0.01, &mut r), ParticleFate::Alive);
        }
        assert_eq!((p.x, p.y, p.z), (500.0, 500.0, 500.0));
    }

    #[test]
    fn survival_follows_the_exponential_law() {
        let kd = 0.05;
        let t = 20.0;
        let steps = 200;
        let dt = t / steps as f64;
        let params = big_box(1.0, 0.0, kd);
        let mut r = rng(2);
        let n = 10_000;
        let mut alive = 0;
        for _ in 0..n {
            let mut p = ParticleState { x: 5e5, y: 5e5, z: 5e5, alive: true };
            let mut ok = true;
            for _ in 0..steps {
                if step_particle(&mut p, &params, dt, &mut r) != ParticleFate::Alive {
                    ok = false;
                    break;
                }
            }
            if ok {
                alive += 1;
            }
        }
        let expect = libm::exp(-kd * t);
        let sigma = libm::sqrt(expect * (1.0 - expect) / n as f64);
        let got = alive as f64 / n as f64;
        assert!((got - expect).abs() < 3.0 * sigma, "got {got}, want {expect} ± {sigma}");
    }

    #[test]
    fn drift_diffusion_moments() {
        let d = 89.0;
        let u = 0.5;
        let t = 10.0;
        let steps = 100;
        let dt = t / steps as f64;
        let params = big_box(d, u, 0.0);
        let mut r = rng(3);
        let n = 4_000;
        let x0 = 5e5;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut p = ParticleState { x: x0, y: 5e5, z: 5e5, alive: true };
            for _ in 0..steps {
                step_particle(&mut p, &params, dt, &mut r);
            }
            sum += p.x - x0;
        }
        let mean = sum / n as f64;
        let se = libm::sqrt(2.0 * d * t / n as f64);
        assert!((mean - u * t).abs() < 3.0 * se, "mean {mean}, want {} ± {se}", u * t);
    }

    #[test]
    fn lateral_distribution_relaxes_to_uniform() {
        // Reflective box, no absorption: the y marginal is uniform after a
        // few crossing times. Chi-square test at the 1% level, 25 bins.
        let params = TransportParams {
            length: 100.0,
            width: 15.0,
            height: 3.0,
            flow: 0.0,
            diffusion: 89.0,
            decay: 0.0,
            absorb_probability: 0.0,
        };
        let mut r = rng(4);
        let n = 10_000;
        let bins = 25usize;
        let mut counts = alloc::vec![0u64; bins];
        for _ in 0..n {
            let mut p = ParticleState { x: 50.0, y: 7.5, z: 1.5, alive: true };
            for _ in 0..200 {
                step_particle(&mut p, &params, 0.05, &mut r);
            }
            assert!(p.y >= 0.0 && p.y <= 15.0 && p.z >= 0.0 && p.z <= 3.0);
            let b = ((p.y / 15.0 * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let expect = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 1% critical value for 24 degrees of freedom.
        assert!(chi2 < 42.979_84, "chi2 {chi2}");
    }

    #[test]
    fn reflection_keeps_particles_inside() {
        let params = TransportParams {
            length: 2.0,
            width: 1.0,
            height: 0.5,
            flow: 0.0,
            diffusion: 50.0,
            decay: 0.0,
            absorb_probability: 0.0,
        };
        let mut r = rng(5);
        let mut p = ParticleState { x: 1.0, y: 0.5, z: 0.25, alive: true };
        for _ in 0..2_000 {
            step_particle(&mut p, &params, 0.01, &mut r);
            assert!(p.x >= 0.0 && p.x <= 2.0);
            assert!(p.y >= 0.0 && p.y <= 1.0);
            assert!(p.z >= 0.0 && p.z <= 0.5);
        }
    }

    #[test]
    fn seed_derivation_is_distinct() {
        let a = realization_seed(42, 0);
        let b = realization_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, realization_seed(42, 0));
    }
}
