//! Independent fine-step RK4 oracles for the cell blocks.
//!
//! The oracle integrates the underlying ODE systems directly — molecule
//! exchange, (repressor) production, repression, bimolecular annihilation,
//! release — at one hundred sub-steps per sampling interval, driven by the
//! same staircase inputs the streaming operators consume. Nothing here
//! shares code with the streaming implementations.

use csk_core::kinetics::{
    run_block, BlockKind, CellBlock, CellBlockConfig, HillActivation, Repression,
};
use csk_core::trace::SignalTrace;
use csk_core::units::per_minute;

fn hill(x: f64, rate: f64, theta: f64, n: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    rate * x.powf(n) / (1.0 + (theta * x).powf(n))
}

fn repression(r: f64, theta: f64, n: f64) -> f64 {
    1.0 / (1.0 + (theta * r).powf(n))
}

/// Classic fixed-step RK4 over one sampling interval with a constant
/// absorption rate, sub-stepped so the staircase discontinuities always land
/// on step boundaries.
fn rk4_interval<F>(deriv: &F, y: &mut [f64], dt: f64, substeps: usize)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        deriv(y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        deriv(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        deriv(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        deriv(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

struct OracleOutput {
    /// Net released concentration per interval.
    net: Vec<f64>,
    /// Repressor trajectory sampled at interval ends.
    repressor: Vec<f64>,
}

/// Integrates the full block ODE system with absorbed amounts spread
/// uniformly over their intervals.
fn oracle(cfg: &CellBlockConfig, input: &SignalTrace, c_th: f64, substeps: usize) -> OracleOutput {
    let ts = input.ts();
    // State: [intake, repressor, internal output, released].
    let mut y = [0.0f64; 4];
    let mut net = Vec::with_capacity(input.len());
    let mut repressor = Vec::with_capacity(input.len());
    let a = cfg.output_decay + cfg.release_rate;
    for &mass in input.values() {
        let influx = cfg.eta * mass / ts;
        let released_before = y[3];
        let deriv = |y: &[f64], dy: &mut [f64]| {
            let production = match cfg.kind {
                BlockKind::Id => hill(y[0], cfg.drive.rate, cfg.drive.theta, cfg.drive.n),
                BlockKind::Not | BlockKind::Threshold => {
                    let rep = cfg.repression.unwrap();
                    cfg.output_rate * repression(y[1], rep.theta, rep.n)
                }
            };
            match cfg.kind {
                BlockKind::Id => {
                    dy[0] = influx - cfg.input_decay * y[0];
                    dy[1] = 0.0;
                }
                BlockKind::Not => {
                    dy[0] = influx - cfg.input_decay * y[0];
                    dy[1] = hill(y[0], cfg.drive.rate, cfg.drive.theta, cfg.drive.n)
                        - cfg.repressor_decay * y[1];
                }
                BlockKind::Threshold => {
                    let f_r = hill(c_th, cfg.drive.rate, cfg.drive.theta, cfg.drive.n);
                    let burn = cfg.reaction_rate * y[0] * y[1];
                    dy[0] = influx - burn - cfg.input_decay * y[0];
                    dy[1] = f_r - burn - cfg.repressor_decay * y[1];
                }
            }
            dy[2] = production - a * y[2];
            dy[3] = cfg.release_rate * y[2];
        };
        rk4_interval(&deriv, &mut y, ts, substeps);
        net.push((y[3] - released_before) * cfg.gain);
        repressor.push(y[1]);
    }
    OracleOutput { net, repressor }
}

fn sup_rel_error(got: &[f64], want: &[f64]) -> f64 {
    let sup = want.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        / sup
}

fn id_cfg() -> CellBlockConfig {
    // Identity gate producing the generic carrier molecule; response fitted
    // on the input factor.
    CellBlockConfig {
        kind: BlockKind::Id,
        eta: 1.0,
        input_decay: per_minute(0.05),
        drive: HillActivation { rate: per_minute(0.162), theta: 0.26, n: 0.9 },
        repression: None,
        repressor_decay: 0.0,
        reaction_rate: 0.0,
        output_rate: per_minute(0.162),
        output_decay: per_minute(0.023),
        release_rate: 20.0,
        gain: 1.0,
    }
}

fn not_cfg() -> CellBlockConfig {
    CellBlockConfig {
        kind: BlockKind::Not,
        eta: 1.0,
        input_decay: per_minute(0.023),
        drive: HillActivation { rate: per_minute(0.615), theta: 0.167, n: 1.2 },
        repression: Some(Repression { theta: 1550.0, n: 2.0 }),
        repressor_decay: per_minute(0.15),
        reaction_rate: 0.0,
        output_rate: per_minute(0.0369),
        output_decay: per_minute(0.05),
        release_rate: 20.0,
        gain: 1.0,
    }
}

fn threshold_cfg() -> CellBlockConfig {
    CellBlockConfig {
        kind: BlockKind::Threshold,
        eta: 1.0,
        input_decay: per_minute(0.023),
        drive: HillActivation { rate: per_minute(0.615), theta: 0.167, n: 1.2 },
        repression: Some(Repression { theta: 1550.0, n: 2.0 }),
        repressor_decay: per_minute(0.15),
        reaction_rate: 1.0,
        output_rate: per_minute(0.162),
        output_decay: per_minute(0.023),
        release_rate: 20.0,
        gain: 1.0,
    }
}

fn rectangle(ts: f64, len: usize, start: f64, duration: f64, amplitude: f64) -> SignalTrace {
    let mut t = SignalTrace::zeros(0.0, ts, len).unwrap();
    let per_interval = amplitude * ts / duration;
    for k in 0..len {
        let tk = k as f64 * ts;
        if tk >= start && tk < start + duration {
            t.values_mut()[k] = per_interval;
        }
    }
    t
}

#[test]
fn exchange_impulse_matches_ode_decay() {
    // A unit bolus decaying at k_d; the discrete exchange pool should track
    // e^(−k_d t) to first order in ts.
    let k_d = per_minute(0.05);
    let ts = 0.01;
    let mut input = SignalTrace::zeros(0.0, ts, 60_001).unwrap();
    input.values_mut()[0] = 1.0;
    let mut block = CellBlock::new(id_cfg(), ts).unwrap();
    let mut intake_at_10min = 0.0;
    for (k, &v) in input.values().iter().enumerate() {
        block.step(v, 0.0).unwrap();
        if k == 60_000 {
            intake_at_10min = block.state.intake;
        }
    }
    let want = csk_core::kinetics::exchange_impulse(1.0, k_d, 600.0).unwrap();
    // The discrete pool spreads the bolus over its interval, a half-step of
    // extra decay at most.
    assert!((intake_at_10min - want).abs() < k_d * ts * want);
    assert!((want - 0.606_530_659_7).abs() < 1e-9);
}

#[test]
fn id_block_tracks_rk4_within_one_percent() {
    let cfg = id_cfg();
    let ts = 0.01;
    // Rectangular 50 nM over 10 s, then a long tail for the response.
    let input = rectangle(ts, 30_000, 5.0, 10.0, 50.0);
    let got = run_block(&cfg, &input, None).unwrap();
    let want = oracle(&cfg, &input, 0.0, 100);
    let err = sup_rel_error(got.values(), &want.net);
    assert!(err < 0.01, "sup-norm relative error {err}");
}

#[test]
fn not_block_tracks_rk4_within_one_percent() {
    let cfg = not_cfg();
    let ts = 0.01;
    let input = rectangle(ts, 30_000, 5.0, 10.0, 50.0);
    let got = run_block(&cfg, &input, None).unwrap();
    let want = oracle(&cfg, &input, 0.0, 100);
    let err = sup_rel_error(got.values(), &want.net);
    assert!(err < 0.01, "sup-norm relative error {err}");
}

#[test]
fn threshold_block_tracks_rk4_within_two_percent() {
    let cfg = threshold_cfg();
    let ts = 0.01;
    let c_th = 0.01;
    // Let the repressor equilibrate, then deliver a pulse strong enough to
    // burn through it and watch the recovery.
    let n = 200_000;
    let mut input = SignalTrace::zeros(0.0, ts, n).unwrap();
    for k in 0..n {
        let t = k as f64 * ts;
        if (800.0..1200.0).contains(&t) {
            input.values_mut()[k] = 0.002 * ts; // 0.002 nM/s influx
        }
    }
    let th = SignalTrace::constant(0.0, ts, n, c_th).unwrap();
    let got = run_block(&cfg, &input, Some(&th)).unwrap();
    let want = oracle(&cfg, &input, c_th, 100);
    let err = sup_rel_error(got.values(), &want.net);
    assert!(err < 0.02, "sup-norm relative error {err}");

    // Repressor trajectory too.
    let mut block = CellBlock::new(cfg, ts).unwrap();
    let mut rep = Vec::with_capacity(n);
    for &v in input.values() {
        block.step(v, c_th).unwrap();
        rep.push(block.state.repressor);
    }
    let err_r = sup_rel_error(&rep, &want.repressor);
    assert!(err_r < 0.02, "repressor sup-norm relative error {err_r}");
}

#[test]
fn threshold_splitting_converges_with_order_at_least_one() {
    let cfg = threshold_cfg();
    let c_th = 0.01;
    let horizon = 1600.0;
    // Continuous-time input definition, independent of the grid: constant
    // influx over [400, 800) s.
    let influx = 0.003; // nM/s
    let make_input = |ts: f64| {
        let n = (horizon / ts) as usize;
        let mut t = SignalTrace::zeros(0.0, ts, n).unwrap();
        for k in 0..n {
            let tk = k as f64 * ts;
            if (400.0..800.0).contains(&tk) {
                t.values_mut()[k] = influx * ts;
            }
        }
        t
    };
    // Truth: the independent RK4 oracle on the finest grid (its continuous
    // influx model does not depend on the grid choice).
    let ts_base = 0.08;
    let truth = oracle(&cfg, &make_input(ts_base / 4.0), c_th, 100);

    // Compare repressor trajectories at the coarse-grid sample times.
    let mut errors = Vec::new();
    for div in [1usize, 2, 4] {
        let ts = ts_base / div as f64;
        let input = make_input(ts);
        let mut block = CellBlock::new(cfg, ts).unwrap();
        let mut err = 0.0f64;
        let mut sup = 0.0f64;
        for (k, &v) in input.values().iter().enumerate() {
            block.step(v, c_th).unwrap();
            if (k + 1) % div == 0 {
                let truth_idx = (k + 1) * 4 / div - 1;
                let want = truth.repressor[truth_idx];
                err = err.max((block.state.repressor - want).abs());
                sup = sup.max(want.abs());
            }
        }
        errors.push(err / sup);
    }
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "errors {errors:?}");
    // Local order estimates p(ts) = log2(e(ts)/e(ts/2)) approach the formal
    // order 1 from below with an O(ts) bias; extrapolating the estimate
    // sequence cancels that bias.
    let o01 = (errors[0] / errors[1]).log2();
    let o12 = (errors[1] / errors[2]).log2();
    let extrapolated = 2.0 * o12 - o01;
    assert!(o01 >= 0.98 && o12 >= 0.98, "local orders {o01:.4}, {o12:.4}");
    assert!(
        extrapolated >= 0.995,
        "extrapolated order {extrapolated:.4} (locals {o01:.4}, {o12:.4})"
    );
}
