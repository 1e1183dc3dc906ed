//! Analytic end-to-end evaluation of a circuit layout.
//!
//! Nodes are visited in topological order; every edge convolves the upstream
//! release trace with its propagation kernel, absorbed amounts from parallel
//! edges add (concentration mixing in a shared lane), populations advance
//! their block state over the whole grid, and sinks record the absorbed
//! concentration per interval. Because every block is causal and the layout
//! is a DAG, this node-major sweep produces exactly the same samples as a
//! time-major sweep, one interval at a time, would.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::Surface;
use crate::propagation::{build_kernel, propagate, KernelOptions, PropagationKernel};
use crate::scenario::Scenario;
use crate::species::SpeciesId;
use crate::synthesis::NodeRef;
use crate::trace::SignalTrace;
use crate::units::concentration_to_count;
use crate::{Error, Result};

/// Everything a kernel depends on, with floats keyed bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelKey {
    pub species: SpeciesId,
    pub distance: u64,
    pub emit: (u64, u64),
    pub absorb: (u64, u64),
    pub diffusion: u64,
    pub wall_absorption: u64,
    pub decay: u64,
    pub width: u64,
    pub height: u64,
    pub flow: u64,
    pub ts: u64,
    pub horizon: u64,
}

impl KernelKey {
    fn new(
        scenario: &Scenario,
        species: &SpeciesId,
        distance: f64,
        emit: &Surface,
        absorb: &Surface,
    ) -> Result<Self> {
        let p = scenario.species.get(species)?;
        Ok(KernelKey {
            species: species.clone(),
            distance: distance.to_bits(),
            emit: (emit.y_lo.to_bits(), emit.y_hi.to_bits()),
            absorb: (absorb.y_lo.to_bits(), absorb.y_hi.to_bits()),
            diffusion: p.diffusion.to_bits(),
            wall_absorption: p.wall_absorption.to_bits(),
            decay: p.k_d.to_bits(),
            width: scenario.geometry.width().to_bits(),
            height: scenario.geometry.height.to_bits(),
            flow: scenario.geometry.flow.to_bits(),
            ts: scenario.ts.to_bits(),
            horizon: scenario.horizon.to_bits(),
        })
    }
}

/// Backing store for built kernels (e.g. an on-disk cache in the CLI).
pub trait KernelStore {
    fn load(&mut self, key: &KernelKey) -> Option<PropagationKernel>;
    fn store(&mut self, key: &KernelKey, kernel: &PropagationKernel);
}

/// Store that never hits.
#[derive(Debug, Default)]
pub struct NoStore;

impl KernelStore for NoStore {
    fn load(&mut self, _key: &KernelKey) -> Option<PropagationKernel> {
        None
    }
    fn store(&mut self, _key: &KernelKey, _kernel: &PropagationKernel) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRetention {
    /// Keep every population's release trace plus the sinks.
    All,
    /// Keep only sink traces; intermediate traces are dropped once consumed.
    SinksOnly,
}

#[derive(Debug, Clone, Default)]
pub struct CascadeOutput {
    /// Net released output per population, by name (retention permitting).
    pub outputs: BTreeMap<String, SignalTrace>,
    /// Absorbed concentration per interval at each detection wall.
    pub sinks: BTreeMap<String, SignalTrace>,
}

pub fn evaluate(scenario: &Scenario, retention: TraceRetention) -> Result<CascadeOutput> {
    evaluate_with_store(scenario, retention, &mut NoStore)
}

pub fn evaluate_with_store(
    scenario: &Scenario,
    retention: TraceRetention,
    store: &mut dyn KernelStore,
) -> Result<CascadeOutput> {
    scenario.validate()?;
    let layout = &scenario.layout;
    let n = scenario.grid_len();
    let ts = scenario.ts;
    let n_pop = layout.populations.len();

    // Topological order over populations (edges always point downstream, but
    // the explicit sort also rejects malformed graphs).
    let mut indegree = alloc::vec![0usize; n_pop];
    for e in &layout.edges {
        if let (NodeRef::Population(_), true) | (NodeRef::Source(_), true) =
            (e.from, matches!(e.to, NodeRef::Population(_)))
        {
            if let (NodeRef::Population(_), NodeRef::Population(i)) = (e.from, e.to) {
                indegree[i] += 1;
            }
        }
    }
    let mut ready: Vec<usize> =
        (0..n_pop).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n_pop);
    while let Some(i) = ready.pop() {
        order.push(i);
        for e in &layout.edges {
            if let (NodeRef::Population(a), NodeRef::Population(b)) = (e.from, e.to) {
                if a == i {
                    indegree[b] -= 1;
                    if indegree[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
    }
    if order.len() != n_pop {
        return Err(Error::Wiring("layout contains a cycle".into()));
    }

    // Remaining consumer counts for memory reclamation.
    let mut consumers = alloc::vec![0usize; n_pop];
    for e in &layout.edges {
        if let NodeRef::Population(i) = e.from {
            consumers[i] += 1;
        }
    }

    let mut kernels: BTreeMap<KernelKey, PropagationKernel> = BTreeMap::new();
    let opts = KernelOptions::default();
    let kernel_for = |scenario: &Scenario,
                          species: &SpeciesId,
                          distance: f64,
                          emit: &Surface,
                          absorb: &Surface,
                          kernels: &mut BTreeMap<KernelKey, PropagationKernel>,
                          store: &mut dyn KernelStore|
     -> Result<PropagationKernel> {
        let key = KernelKey::new(scenario, species, distance, emit, absorb)?;
        if let Some(k) = kernels.get(&key) {
            return Ok(k.clone());
        }
        if let Some(k) = store.load(&key) {
            kernels.insert(key, k.clone());
            return Ok(k);
        }
        let sp = scenario.species.get(species)?;
        let k = build_kernel(
            distance,
            *emit,
            *absorb,
            sp,
            &scenario.geometry,
            ts,
            scenario.horizon,
            &opts,
        )?;
        store.store(&key, &k);
        kernels.insert(key, k.clone());
        Ok(k)
    };

    // Source release traces.
    let mut source_traces = Vec::with_capacity(layout.sources.len());
    for s in &layout.sources {
        source_traces.push(scenario.schedule.source_trace(s.bit, ts, n)?);
    }

    let mut pop_out: Vec<Option<SignalTrace>> = alloc::vec![None; n_pop];
    let mut out = CascadeOutput::default();

    // Absorbed-input assembly shared by populations and sinks.
    let absorbed_into = |target: NodeRef,
                             pop_out: &Vec<Option<SignalTrace>>,
                             kernels: &mut BTreeMap<KernelKey, PropagationKernel>,
                             store: &mut dyn KernelStore|
     -> Result<SignalTrace> {
        let mut acc = SignalTrace::zeros(0.0, ts, n)?;
        for e in &layout.edges {
            if e.to != target {
                continue;
            }
            let geom = layout.edge_geometry(e)?;
            let upstream: &SignalTrace = match e.from {
                NodeRef::Source(i) => &source_traces[i],
                NodeRef::Population(i) => pop_out[i]
                    .as_ref()
                    .ok_or(Error::Wiring("edge consumed before its producer ran".into()))?,
                NodeRef::Sink(_) => unreachable!("validated layout"),
            };
            let kernel = kernel_for(
                scenario,
                &geom.species,
                geom.distance,
                &geom.emit,
                &geom.absorb,
                kernels,
                store,
            )?;
            let contribution = propagate(&kernel, upstream)?;
            acc.add_assign_trace(&contribution)?;
        }
        Ok(acc)
    };

    for &i in &order {
        let pop = &layout.populations[i];
        let absorbed = absorbed_into(NodeRef::Population(i), &pop_out, &mut kernels, store)?;
        let cfg = scenario.block_config(pop)?;
        let threshold = pop
            .threshold_level
            .map(|lvl| SignalTrace::constant(0.0, ts, n, lvl))
            .transpose()?;
        let released = crate::kinetics::run_block(&cfg, &absorbed, threshold.as_ref())?;
        if retention == TraceRetention::All {
            out.outputs.insert(pop.name.clone(), released.clone());
        }
        pop_out[i] = Some(released);

        // Free upstream traces nobody else needs.
        if retention == TraceRetention::SinksOnly {
            for e in &layout.edges {
                if e.to == NodeRef::Population(i) {
                    if let NodeRef::Population(a) = e.from {
                        consumers[a] -= 1;
                        if consumers[a] == 0 {
                            pop_out[a] = None;
                        }
                    }
                }
            }
        }
    }

    for (si, sink) in layout.sinks.iter().enumerate() {
        let absorbed = absorbed_into(NodeRef::Sink(si), &pop_out, &mut kernels, store)?;
        out.sinks.insert(sink.name.clone(), absorbed);
    }

    Ok(out)
}

/// Molecules absorbed at a sink within the window centred on `time`: the
/// sampled response at `time` as a local average of the absorption stream.
pub fn window_count(
    trace: &SignalTrace,
    sink_volume: f64,
    time: f64,
    window: f64,
) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::Domain("decision window must be positive"));
    }
    let end = trace.t0() + trace.ts() * trace.len() as f64;
    if time + 0.5 * window > end + 1e-9 * trace.ts() {
        return Err(Error::Domain("sample window extends beyond the trace horizon"));
    }
    let mut total = 0.0;
    let lo = time - 0.5 * window;
    let hi = time + 0.5 * window;
    let first = if lo <= trace.t0() { 0 } else { ((lo - trace.t0()) / trace.ts()) as usize + 1 };
    for k in first..trace.len() {
        let t = trace.time_at(k);
        if t > hi {
            break;
        }
        total += trace.values()[k];
    }
    concentration_to_count(total, sink_volume)
}

/// Thresholded detection: bit-1 iff the windowed absorbed count exceeds the
/// detection threshold.
pub fn sample_and_decide(
    trace: &SignalTrace,
    sink_volume: f64,
    sample_times: &[f64],
    window: f64,
    detection_threshold: f64,
) -> Result<Vec<bool>> {
    if detection_threshold < 0.0 {
        return Err(Error::Domain("detection threshold must be non-negative"));
    }
    sample_times
        .iter()
        .map(|&t| window_count(trace, sink_volume, t, window).map(|c| c > detection_threshold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{library, InputSchedule, Scenario};
    use crate::synthesis::synthesize;
    use alloc::vec;

    fn bcsk_scenario() -> Scenario {
        let geometry = crate::geometry::ChannelGeometry {
            stations: vec![0.0, 1.0, 4.0, 39.0, 42.0, 43.0],
            lanes: vec![0.0, 5.0],
            height: 3.0,
            cell_radius: 0.5,
            flow: 0.1,
        };
        let layout = synthesize(1, &geometry, &[0.01]).unwrap();
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
            schedule: InputSchedule {
                symbols: vec![1],
                amplitude: 50.0,
                duration: 10.0,
                period: 600.0,
                start: 60.0,
            },
            ts: 0.5,
            horizon: 1800.0,
            reference_depth: library::REFERENCE_DEPTH,
            seed: 7,
            realizations: 4,
            particle_substeps: 50,
        }
    }

    #[test]
    fn zero_input_keeps_id_paths_silent() {
        let mut sc = bcsk_scenario();
        sc.schedule.symbols = vec![0];
        let out = evaluate(&sc, TraceRetention::All).unwrap();
        assert!(out.outputs["tx_id"].values().iter().all(|&v| v == 0.0));
        // The thresholding population's repressed leak is the only sink
        // signal and it is tiny but non-negative.
        assert!(out.sinks["y0"].values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn bit_one_produces_a_delayed_receiver_response() {
        let sc = bcsk_scenario();
        let out = evaluate(&sc, TraceRetention::All).unwrap();
        let tx = &out.outputs["tx_id"];
        let rx = &out.sinks["y0"];
        let (tx_peak_at, tx_peak) = tx.peak().unwrap();
        let (rx_peak_at, rx_peak) = rx.peak().unwrap();
        assert!(tx_peak > 0.0 && rx_peak > 0.0);
        assert!(tx_peak_at > 0 && rx_peak_at > tx_peak_at, "{tx_peak_at} vs {rx_peak_at}");
    }

    #[test]
    fn retention_modes_agree_on_sinks() {
        let sc = bcsk_scenario();
        let all = evaluate(&sc, TraceRetention::All).unwrap();
        let lean = evaluate(&sc, TraceRetention::SinksOnly).unwrap();
        assert_eq!(all.sinks["y0"], lean.sinks["y0"]);
        assert!(lean.outputs.is_empty());
    }

    #[test]
    fn window_count_and_decisions() {
        let trace = SignalTrace::new(0.0, 1.0, vec![0.0, 1.0, 1.0, 0.0, 2.0]).unwrap();
        let vol = 1.0 / crate::units::MOLECULES_PER_NM_UM3; // 1 nM == 1 molecule
        // Centred on t = 1.5 with width 2: intervals starting in (0.5, 2.5].
        let c = window_count(&trace, vol, 1.5, 2.0).unwrap();
        assert!((c - 2.0).abs() < 1e-12, "{c}");
        let d = sample_and_decide(&trace, vol, &[1.5, 4.0], 2.0, 1.5).unwrap();
        assert_eq!(d, vec![true, true]);
        let d0 = sample_and_decide(&trace, vol, &[1.5], 2.0, 2.5).unwrap();
        assert_eq!(d0, vec![false]);
        assert!(window_count(&trace, vol, 99.0, 1.0).is_err());
        assert!(window_count(&trace, vol, 4.8, 1.0).is_err());
    }
}
