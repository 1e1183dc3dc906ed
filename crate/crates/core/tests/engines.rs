//! Cross-engine checks: the analytic cascade against the particle engine,
//! determinism, census accounting, and the operator-composition identity.

use csk_core::cascade::{evaluate, TraceRetention};
use csk_core::geometry::{ChannelGeometry, Surface};
use csk_core::kinetics::run_block;
use csk_core::propagation::{build_kernel, propagate, KernelOptions};
use csk_core::scenario::{library, InputSchedule, Scenario};
use csk_core::species::SpeciesId;
use csk_core::stochastic::{run_realization, run_realizations};
use csk_core::synthesis::{synthesize, CircuitLayout, Edge, NodeRef, SinkSpec, SourceSpec};
use csk_core::trace::SignalTrace;
use csk_core::units::MOLECULES_PER_NM_UM3;

fn base_scenario(layout: CircuitLayout, geometry: ChannelGeometry) -> Scenario {
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
            period: 3600.0,
            start: 60.0,
        },
        ts: 0.5,
        horizon: 1800.0,
        reference_depth: library::REFERENCE_DEPTH,
        seed: 11,
        realizations: 8,
        particle_substeps: 50,
    }
}

fn bcsk_geometry() -> ChannelGeometry {
    ChannelGeometry {
        stations: vec![0.0, 1.0, 4.0, 39.0, 42.0, 43.0],
        lanes: vec![0.0, 5.0],
        height: 3.0,
        cell_radius: 0.5,
        flow: 0.1,
    }
}

fn bcsk_scenario() -> Scenario {
    let geometry = bcsk_geometry();
    let layout = synthesize(1, &geometry, &[0.01]).unwrap();
    base_scenario(layout, geometry)
}

/// Propagation-only layout: one emitting lane, two detection strips on the
/// wall ten micrometres downstream.
fn two_strip_scenario() -> Scenario {
    let geometry = ChannelGeometry {
        stations: vec![0.0, 10.0],
        lanes: vec![0.0, 2.5, 5.0, 10.0, 15.0],
        height: 3.0,
        cell_radius: 0.5,
        flow: 0.1,
    };
    let dox = SpeciesId::new("DOX");
    let layout = CircuitLayout {
        populations: vec![],
        sources: vec![SourceSpec {
            name: "src".into(),
            bit: 0,
            lane: Surface::new(0.0, 5.0).unwrap(),
            emit_x: 0.0,
            species: dox.clone(),
        }],
        sinks: vec![
            SinkSpec {
                name: "near".into(),
                bit: 0,
                lane: Surface::new(0.0, 1.25).unwrap(),
                absorb_x: 10.0,
                species: dox.clone(),
            },
            SinkSpec {
                name: "far".into(),
                bit: 0,
                lane: Surface::new(13.75, 15.0).unwrap(),
                absorb_x: 10.0,
                species: dox,
            },
        ],
        edges: vec![
            Edge { from: NodeRef::Source(0), to: NodeRef::Sink(0) },
            Edge { from: NodeRef::Source(0), to: NodeRef::Sink(1) },
        ],
    };
    let mut sc = base_scenario(layout, ChannelGeometry {
        stations: vec![0.0, 10.0],
        lanes: vec![0.0, 2.5, 5.0, 10.0, 15.0],
        height: 3.0,
        cell_radius: 0.5,
        flow: 0.1,
    });
    let _ = geometry;
    // Impulse of 500 molecules from the source lane.
    let v_src = 5.0 * 3.0 * sc.reference_depth;
    sc.schedule = InputSchedule {
        symbols: vec![1],
        amplitude: 500.0 / (v_src * MOLECULES_PER_NM_UM3),
        duration: 0.0,
        period: 60.0,
        start: 0.0,
    };
    sc.ts = 0.25;
    sc.horizon = 30.0;
    sc.particle_substeps = 25;
    sc
}

#[test]
fn stochastic_runs_are_seed_deterministic() {
    let sc = two_strip_scenario();
    let a = run_realization(&sc, 123).unwrap();
    let b = run_realization(&sc, 123).unwrap();
    assert_eq!(a.sinks, b.sinks);
    assert_eq!(a.census, b.census);
    let c = run_realization(&sc, 124).unwrap();
    assert_ne!(a.sinks, c.sinks);
}

#[test]
fn census_balances_exactly() {
    for sc in [two_strip_scenario(), bcsk_scenario()] {
        let out = run_realization(&sc, 5).unwrap();
        assert_eq!(out.census.violations, 0);
        assert_eq!(
            out.census.emitted,
            out.census.alive
                + out.census.degraded
                + out.census.absorbed_credited
                + out.census.absorbed_wall
        );
        assert!(out.census.emitted > 0);
    }
}

#[test]
fn absorbed_counts_match_analytic_kernel_within_three_standard_errors() {
    let sc = two_strip_scenario();
    let analytic = evaluate(&sc, TraceRetention::SinksOnly).unwrap();
    let stats = run_realizations(&sc, 40, 17).unwrap();
    assert_eq!(stats.census.violations, 0);

    for sink in ["near", "far"] {
        let lane = sc
            .layout
            .sinks
            .iter()
            .find(|s| s.name == sink)
            .unwrap()
            .lane;
        let volume = sc.lane_volume(&lane);
        let (mean, se) = &stats.sinks[sink];
        let ana = &analytic.sinks[sink];
        // Compare in molecule counts per interval; stop once the analytic
        // tail is negligible. The one-molecule resolution over the ensemble
        // floors the standard error.
        let ana_counts: Vec<f64> =
            ana.values().iter().map(|nm| nm * volume * MOLECULES_PER_NM_UM3).collect();
        let total: f64 = ana_counts.iter().sum();
        let mut cum = 0.0;
        let floor = 1.0 / stats.n as f64;
        let mut checked = 0usize;
        let mut ok = 0usize;
        for k in 0..ana_counts.len() {
            cum += ana_counts[k];
            if cum > 0.999 * total {
                break;
            }
            let tol = 3.0 * se[k].max(floor);
            checked += 1;
            if (mean[k] - ana_counts[k]).abs() <= tol {
                ok += 1;
            }
        }
        assert!(checked > 20, "{sink}: only {checked} bins checked");
        assert!(
            ok as f64 >= 0.95 * checked as f64,
            "{sink}: {ok}/{checked} bins within 3 SE"
        );
    }

    // The offset strip sees molecules later and fewer of them.
    let (near_mean, _) = &stats.sinks["near"];
    let (far_mean, _) = &stats.sinks["far"];
    let near_total: f64 = near_mean.iter().sum();
    let far_total: f64 = far_mean.iter().sum();
    assert!(far_total < near_total);
}

#[test]
fn standard_error_scales_like_inverse_sqrt_n() {
    let mut sc = two_strip_scenario();
    // Fewer molecules keep this cheap.
    sc.schedule.amplitude /= 5.0;
    let s100 = run_realizations(&sc, 100, 7).unwrap();
    let s400 = run_realizations(&sc, 400, 7).unwrap();
    let peak = {
        let (mean, _) = &s400.sinks["near"];
        mean.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    };
    let se100 = s100.sinks["near"].1[peak];
    let se400 = s400.sinks["near"].1[peak];
    let ratio = se100 / se400;
    assert!(
        (ratio - 2.0).abs() <= 0.4,
        "SE ratio {ratio} (se100 {se100}, se400 {se400})"
    );
}

#[test]
fn unrepressed_threshold_agent_tracks_the_analytic_trajectory() {
    // C_Th = 0 degenerates the thresholding block into an always-on
    // producer; with zero input the agents run deterministically and their
    // quantized emissions must track the analytic release closely.
    let geometry = bcsk_geometry();
    let mut layout = synthesize(1, &geometry, &[0.0]).unwrap();
    layout.populations[1].threshold_level = Some(0.0);
    let mut sc = base_scenario(layout, geometry);
    sc.schedule.symbols = vec![0];
    sc.horizon = 900.0;
    let analytic = evaluate(&sc, TraceRetention::All).unwrap();
    let out = run_realization(&sc, 3).unwrap();
    let lane = sc.layout.populations[1].lane;
    let volume = sc.lane_volume(&lane);
    let ana_cum: f64 =
        analytic.outputs["rx_thr_b0"].total() * volume * MOLECULES_PER_NM_UM3;
    let sto_cum: f64 = out.released["rx_thr_b0"].iter().sum();
    // Five strips each carry a sub-molecule rounding residual.
    assert!(
        (ana_cum - sto_cum).abs() <= 5.0,
        "analytic {ana_cum:.1} vs stochastic {sto_cum:.1} molecules"
    );
    assert!(ana_cum > 20.0);
}

#[test]
fn evaluate_equals_hand_composed_operator_chain() {
    let sc = bcsk_scenario();
    let full = evaluate(&sc, TraceRetention::All).unwrap();

    // Compose the same link by hand: P -> ID -> P -> threshold -> P.
    let n = sc.grid_len();
    let opts = KernelOptions::default();
    let dox = SpeciesId::new("DOX");
    let aca = SpeciesId::new("aCa");
    let asc = SpeciesId::new("aSc");
    let lane = Surface::new(0.0, 5.0).unwrap();
    let src = sc.schedule.source_trace(0, sc.ts, n).unwrap();

    let k_in = build_kernel(
        1.0,
        lane,
        lane,
        sc.species.get(&aca).unwrap(),
        &sc.geometry,
        sc.ts,
        sc.horizon,
        &opts,
    )
    .unwrap();
    let absorbed_tx = propagate(&k_in, &src).unwrap();
    let id_cfg = sc.block_config(&sc.layout.populations[0]).unwrap();
    let tx = run_block(&id_cfg, &absorbed_tx, None).unwrap();

    let k_ch = build_kernel(
        35.0,
        lane,
        lane,
        sc.species.get(&dox).unwrap(),
        &sc.geometry,
        sc.ts,
        sc.horizon,
        &opts,
    )
    .unwrap();
    let absorbed_rx = propagate(&k_ch, &tx).unwrap();
    let th_cfg = sc.block_config(&sc.layout.populations[1]).unwrap();
    let th_trace = SignalTrace::constant(0.0, sc.ts, n, 0.01).unwrap();
    let rx_out = run_block(&th_cfg, &absorbed_rx, Some(&th_trace)).unwrap();

    let k_det = build_kernel(
        1.0,
        lane,
        lane,
        sc.species.get(&asc).unwrap(),
        &sc.geometry,
        sc.ts,
        sc.horizon,
        &opts,
    )
    .unwrap();
    let rx = propagate(&k_det, &rx_out).unwrap();

    assert_eq!(full.outputs["tx_id"], tx);
    assert_eq!(full.sinks["y0"], rx);
}

#[test]
fn delayed_input_shifts_responses_exactly() {
    // Time-invariance on ID/threshold paths once the threshold repressor has
    // equilibrated: delaying the input by k samples delays the
    // baseline-subtracted outputs by exactly k samples.
    let mut sc = bcsk_scenario();
    sc.ts = 1.0;
    sc.horizon = 9000.0;
    sc.schedule.start = 4800.0; // ≥ 10 repressor time constants
    let shift = 40usize;

    let mut delayed = sc.clone();
    delayed.schedule.start = 4800.0 + shift as f64 * sc.ts;

    let mut zero = sc.clone();
    zero.schedule.symbols = vec![0];

    let a = evaluate(&sc, TraceRetention::SinksOnly).unwrap();
    let b = evaluate(&delayed, TraceRetention::SinksOnly).unwrap();
    let base = evaluate(&zero, TraceRetention::SinksOnly).unwrap();

    let ya = a.sinks["y0"].values();
    let yb = b.sinks["y0"].values();
    let y0 = base.sinks["y0"].values();
    let peak = ya
        .iter()
        .zip(y0)
        .map(|(v, b)| (v - b).abs())
        .fold(0.0f64, f64::max);
    assert!(peak > 0.0);
    for k in 0..ya.len() - shift {
        let da = ya[k] - y0[k];
        let db = yb[k + shift] - y0[k + shift];
        assert!(
            (da - db).abs() <= 1e-6 * peak,
            "sample {k}: {da} vs {db} (peak {peak})"
        );
    }
}
