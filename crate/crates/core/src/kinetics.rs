//! The three engineered-cell building blocks — identity (ID), inverter (NOT)
//! and thresholding — as streaming per-interval operators.
//!
//! A block consumes, per sampling interval, the concentration absorbed on its
//! upstream face (nM, a per-interval amount) and returns the net
//! concentration released on its downstream face during the same interval.
//! Internally each block advances a small ODE state with exact exponential
//! updates:
//!
//! * exchange pool: absorbed amounts enter scaled by the exchange rate η and
//!   decay at the input molecule's k_d;
//! * production: a saturating Hill drive, either inducing the output directly
//!   (ID) or inducing a repressor that shuts the output down (NOT); the
//!   thresholding block induces its repressor from a dedicated threshold
//!   signal and burns it against the input through a bimolecular reaction,
//!   advanced by an operator-splitting step (production, degradation, then
//!   the exactly solved reaction);
//! * release: output molecules leave the cell at rate ξ; the per-interval net
//!   release is the exact integral of ξ·C_out over the step.
//!
//! `closed_form` reimplements the ID and NOT responses as explicit discrete
//! convolutions of their impulse-response factorizations; the two routes are
//! required to agree and are tested against each other.

use alloc::vec::Vec;

use crate::trace::SignalTrace;
use crate::{Error, Result};

/// Relative tolerance deciding when the two reactant pools count as equal in
/// the splitting step; the equal-reactant formula is the analytic limit of
/// the unequal one, which degenerates to 0/0 there.
pub const REACTANT_EQUALITY_TOL: f64 = 1e-9;

/// Saturating production drive β·xⁿ/(1+(θx)ⁿ).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HillActivation {
    /// Maximal-scale production rate β (nM/s).
    pub rate: f64,
    /// Fitting parameter θ (1/nM).
    pub theta: f64,
    /// Hill coefficient n.
    pub n: f64,
}

impl HillActivation {
    /// Occupancy term (θx)ⁿ/(1+(θx)ⁿ), evaluated through the logistic form
    /// so large θx cannot overflow.
    pub fn occupancy(&self, x: f64) -> f64 {
        if x <= 0.0 || self.theta <= 0.0 {
            return 0.0;
        }
        let e = self.n * libm::log(self.theta * x);
        if e >= 0.0 {
            1.0 / (1.0 + libm::exp(-e))
        } else {
            let s = libm::exp(e);
            s / (1.0 + s)
        }
    }

    /// Production rate (nM/s) at input level `x` (nM).
    pub fn production(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.theta <= 0.0 {
            // Unsaturated power law; only reachable when β = 0 forces no
            // production anyway or a caller passes θ = 0 deliberately.
            return self.rate * libm::exp(self.n * libm::log(x));
        }
        self.rate * libm::exp(-self.n * libm::log(self.theta)) * self.occupancy(x)
    }

    /// Saturation production rate β/θⁿ (nM/s).
    pub fn saturation(&self) -> f64 {
        if self.theta <= 0.0 {
            return f64::INFINITY;
        }
        self.rate * libm::exp(-self.n * libm::log(self.theta))
    }
}

/// Repression factor 1/(1+(θr)ⁿ) of a repressor on its promoter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Repression {
    pub theta: f64,
    pub n: f64,
}

impl Repression {
    pub fn factor(&self, repressor: f64) -> f64 {
        if repressor <= 0.0 || self.theta <= 0.0 {
            return 1.0;
        }
        let e = self.n * libm::log(self.theta * repressor);
        if e <= 0.0 {
            1.0 / (1.0 + libm::exp(e))
        } else {
            let s = libm::exp(-e);
            s / (1.0 + s)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BlockKind {
    Id,
    Not,
    Threshold,
}

/// Resolved numeric configuration of one cell population.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellBlockConfig {
    pub kind: BlockKind,
    /// Exchange rate η; absorbed amounts enter the cell scaled by η.
    pub eta: f64,
    /// Degradation rate of the exchanged input molecules (1/s).
    pub input_decay: f64,
    /// Production drive. ID: output production induced by the input.
    /// NOT: repressor production induced by the input.
    /// Threshold: repressor production induced by the threshold signal.
    pub drive: HillActivation,
    /// Repression of output production (NOT/Threshold).
    pub repression: Option<Repression>,
    /// Repressor degradation rate (1/s, NOT/Threshold).
    pub repressor_decay: f64,
    /// Bimolecular input-repressor rate k_f (1/(nM·s), Threshold).
    pub reaction_rate: f64,
    /// Unrepressed output production rate β (nM/s, NOT/Threshold).
    pub output_rate: f64,
    /// Output molecule degradation rate (1/s).
    pub output_decay: f64,
    /// Release rate ξ (1/s).
    pub release_rate: f64,
    /// Cell-count weighting ε applied to the released output.
    pub gain: f64,
}

impl CellBlockConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Domain("exchange rate must be positive"));
        }
        if !(self.release_rate > 0.0) {
            return Err(Error::Domain("release rate must be positive"));
        }
        if self.input_decay < 0.0 || self.output_decay < 0.0 || self.repressor_decay < 0.0 {
            return Err(Error::Domain("decay rates must be non-negative"));
        }
        if !(self.gain > 0.0) {
            return Err(Error::Domain("gain must be positive"));
        }
        match self.kind {
            BlockKind::Id => {}
            BlockKind::Not => {
                if self.repression.is_none() {
                    return Err(Error::Config("NOT block needs repression parameters".into()));
                }
            }
            BlockKind::Threshold => {
                if self.repression.is_none() {
                    return Err(Error::Config(
                        "thresholding block needs repression parameters".into(),
                    ));
                }
                if !(self.reaction_rate > 0.0) {
                    return Err(Error::Config(
                        "thresholding block needs a positive reaction rate".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Mutable per-population state. All fields stay non-negative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlockState {
    /// Intracellular input pool C_Iin (nM).
    pub intake: f64,
    /// Repressor pool C_R (nM).
    pub repressor: f64,
    /// Intracellular output pool C_Oin (nM).
    pub internal_output: f64,
    /// Accumulated released output (nM).
    pub released: f64,
}

/// Impulse response of the molecule exchange, η·e^(−k_d·t).
pub fn exchange_impulse(eta: f64, k_d: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain("exchange impulse is causal; t must be non-negative"));
    }
    Ok(eta * libm::exp(-k_d * t))
}

/// One exactly solved bimolecular annihilation step: returns the remaining
/// amount of reactant `a0` after reacting with `b0` for `ts` seconds at rate
/// `k_f`, with one-to-one stoichiometry.
pub fn reaction_step(a0: f64, b0: f64, k_f: f64, ts: f64) -> f64 {
    if a0 <= 0.0 {
        return 0.0;
    }
    if b0 <= 0.0 {
        return a0;
    }
    let scale = a0.max(b0);
    if (a0 - b0).abs() <= REACTANT_EQUALITY_TOL * scale {
        return a0 / (1.0 + k_f * ts * a0);
    }
    let delta = a0 - b0;
    if delta > 0.0 {
        a0 * delta / (a0 - b0 * libm::exp(-k_f * ts * delta))
    } else {
        // Same expression with numerator and denominator rescaled so the
        // exponent stays non-positive.
        let e = libm::exp(k_f * ts * delta);
        a0 * delta * e / (a0 * e - b0)
    }
}

/// Repressor initial condition for the splitting step: production bolus,
/// then degradation over the interval.
pub fn threshold_initial_repressor(c_r_prev: f64, f_r_prev: f64, k_d_r: f64, ts: f64) -> f64 {
    (c_r_prev + ts * f_r_prev) * libm::exp(-k_d_r * ts)
}

/// Input-pool initial condition: exchange bolus, then degradation.
pub fn threshold_initial_input(
    c_iin_prev: f64,
    absorbed: f64,
    eta: f64,
    k_d_in: f64,
    ts: f64,
) -> f64 {
    (c_iin_prev + eta * absorbed) * libm::exp(-k_d_in * ts)
}

/// Full thresholding repressor update over one interval.
pub fn threshold_repressor_step(
    c_r_prev: f64,
    c_iin_prev: f64,
    f_r_prev: f64,
    absorbed: f64,
    cfg: &CellBlockConfig,
    ts: f64,
) -> f64 {
    let r0 = threshold_initial_repressor(c_r_prev, f_r_prev, cfg.repressor_decay, ts);
    let i0 = threshold_initial_input(c_iin_prev, absorbed, cfg.eta, cfg.input_decay, ts);
    reaction_step(r0, i0, cfg.reaction_rate, ts)
}

/// Full thresholding input update; mirror of [`threshold_repressor_step`].
pub fn threshold_input_step(
    c_r_prev: f64,
    c_iin_prev: f64,
    f_r_prev: f64,
    absorbed: f64,
    cfg: &CellBlockConfig,
    ts: f64,
) -> f64 {
    let r0 = threshold_initial_repressor(c_r_prev, f_r_prev, cfg.repressor_decay, ts);
    let i0 = threshold_initial_input(c_iin_prev, absorbed, cfg.eta, cfg.input_decay, ts);
    reaction_step(i0, r0, cfg.reaction_rate, ts)
}

/// Step constants precomputed for one (config, ts) pair.
#[derive(Debug, Clone, Copy)]
struct StepConstants {
    ts: f64,
    q_in: f64,
    /// Weight of one interval's absorbed amount in the exchange pool:
    /// uniform influx integrated against the decay over the interval.
    w_intake: f64,
    q_rep: f64,
    rep_gain: f64,
    q_out: f64,
    /// (1 − q_out)/a: weight of the previous output pool in the release
    /// integral, also the fresh-production weight in the pool update.
    w_pool: f64,
    /// (ts − w_pool)/a: weight of fresh production in the release integral.
    w_fresh: f64,
}

fn decay_weight(k: f64, ts: f64) -> f64 {
    // (1 − e^(−k·ts))/k with a series fallback near k = 0.
    if k * ts < 1e-8 {
        ts * (1.0 - 0.5 * k * ts)
    } else {
        (1.0 - libm::exp(-k * ts)) / k
    }
}

impl StepConstants {
    fn new(cfg: &CellBlockConfig, ts: f64) -> Result<Self> {
        if !(ts > 0.0) {
            return Err(Error::Domain("sampling step must be positive"));
        }
        let a = cfg.output_decay + cfg.release_rate;
        let w_pool = decay_weight(a, ts);
        Ok(StepConstants {
            ts,
            q_in: libm::exp(-cfg.input_decay * ts),
            w_intake: decay_weight(cfg.input_decay, ts) / ts,
            q_rep: libm::exp(-cfg.repressor_decay * ts),
            rep_gain: decay_weight(cfg.repressor_decay, ts),
            q_out: libm::exp(-a * ts),
            w_pool,
            w_fresh: (ts - w_pool) / a,
        })
    }
}

/// A live cell population: configuration, sampling step and mutable state.
#[derive(Debug, Clone)]
pub struct CellBlock {
    cfg: CellBlockConfig,
    consts: StepConstants,
    pub state: BlockState,
}

impl CellBlock {
    pub fn new(cfg: CellBlockConfig, ts: f64) -> Result<Self> {
        cfg.validate()?;
        let consts = StepConstants::new(&cfg, ts)?;
        Ok(CellBlock { cfg, consts, state: BlockState::default() })
    }

    pub fn config(&self) -> &CellBlockConfig {
        &self.cfg
    }

    pub fn ts(&self) -> f64 {
        self.consts.ts
    }

    /// Advances the block by one interval.
    ///
    /// `absorbed` is the input amount (nM) absorbed on the upstream face
    /// during the interval; `threshold_level` is the threshold-molecule
    /// concentration (nM), ignored unless this is a thresholding block.
    /// Returns the net released output for the interval.
    pub fn step(&mut self, absorbed: f64, threshold_level: f64) -> Result<f64> {
        if absorbed < 0.0 {
            return Err(Error::Domain("absorbed input must be non-negative"));
        }
        Ok(self.step_unchecked(absorbed, threshold_level))
    }

    pub(crate) fn step_unchecked(&mut self, absorbed: f64, threshold_level: f64) -> f64 {
        let c = self.consts;
        let cfg = &self.cfg;
        let s = &mut self.state;

        let production = match cfg.kind {
            // ID and NOT advance their linear stages exactly (uniform influx
            // and piecewise-constant production integrated in closed form)
            // and evaluate the static Hill stages trapezoidally over the
            // interval.
            BlockKind::Id => {
                let prev = s.intake;
                s.intake = s.intake * c.q_in + cfg.eta * absorbed * c.w_intake;
                0.5 * (cfg.drive.production(prev) + cfg.drive.production(s.intake))
            }
            BlockKind::Not => {
                let prev = s.intake;
                s.intake = s.intake * c.q_in + cfg.eta * absorbed * c.w_intake;
                let repressor_production =
                    0.5 * (cfg.drive.production(prev) + cfg.drive.production(s.intake));
                let prev_rep = s.repressor;
                s.repressor = s.repressor * c.q_rep + repressor_production * c.rep_gain;
                let rep = cfg.repression.expect("validated");
                cfg.output_rate * 0.5 * (rep.factor(prev_rep) + rep.factor(s.repressor))
            }
            // Thresholding advances by operator splitting: production
            // bolus, degradation, then the exactly solved bimolecular
            // reaction.
            BlockKind::Threshold => {
                let f_r = cfg.drive.production(threshold_level);
                let r0 = (s.repressor + c.ts * f_r) * c.q_rep;
                let i0 = (s.intake + cfg.eta * absorbed) * c.q_in;
                s.repressor = reaction_step(r0, i0, cfg.reaction_rate, c.ts);
                s.intake = reaction_step(i0, r0, cfg.reaction_rate, c.ts);
                cfg.output_rate * cfg.repression.expect("validated").factor(s.repressor)
            }
        };

        let net = cfg.release_rate
            * (s.internal_output * c.w_pool + production * c.w_fresh)
            * cfg.gain;
        s.internal_output = s.internal_output * c.q_out + production * c.w_pool;
        s.released += net;
        net
    }
}

/// Runs a zero-initialized block over a whole input trace.
///
/// `threshold` must be given for thresholding blocks and share the input
/// grid; it is the threshold-molecule concentration over time.
pub fn run_block(
    cfg: &CellBlockConfig,
    input: &SignalTrace,
    threshold: Option<&SignalTrace>,
) -> Result<SignalTrace> {
    if input.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("block input must be non-negative"));
    }
    let th = match (cfg.kind, threshold) {
        (BlockKind::Threshold, Some(t)) => {
            if !t.same_grid(input) || t.len() != input.len() {
                return Err(Error::Grid("threshold trace must share the input grid"));
            }
            Some(t)
        }
        (BlockKind::Threshold, None) => {
            return Err(Error::Config("thresholding block needs a threshold trace".into()))
        }
        (_, _) => None,
    };
    let mut block = CellBlock::new(*cfg, input.ts())?;
    let mut out = Vec::with_capacity(input.len());
    for (k, &x) in input.values().iter().enumerate() {
        let level = th.map_or(0.0, |t| t.values()[k]);
        out.push(block.step_unchecked(x, level));
    }
    SignalTrace::new(input.t0(), input.ts(), out)
}

pub mod closed_form {
    //! Closed convolution forms for the ID and NOT blocks.
    //!
    //! These evaluate the factorized impulse-response expressions with plain
    //! discrete sums, independent of the streaming state machines above, and
    //! exist as the second route for equivalence testing.

    use alloc::vec::Vec;

    use super::CellBlockConfig;
    use crate::trace::SignalTrace;
    use crate::{Error, Result};

    /// Intracellular input pool by explicit convolution with η·e^(−k_d·t),
    /// each interval's absorbed amount entering as a uniform influx.
    pub fn intake(cfg: &CellBlockConfig, input: &SignalTrace) -> Vec<f64> {
        let ts = input.ts();
        let k_in = cfg.input_decay;
        let w = if k_in * ts < 1e-8 {
            1.0 - 0.5 * k_in * ts
        } else {
            (1.0 - libm::exp(-k_in * ts)) / (k_in * ts)
        };
        let n = input.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += cfg.eta * input.values()[j] * w * libm::exp(-k_in * ts * (k - j) as f64);
            }
            out.push(acc);
        }
        out
    }

    /// Trapezoidal per-interval average of a static map applied to a state
    /// trajectory that starts at zero.
    fn interval_average(states: &[f64], map: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut prev = 0.0;
        states
            .iter()
            .map(|&x| {
                let v = 0.5 * (map(prev) + map(x));
                prev = x;
                v
            })
            .collect()
    }

    /// Accumulated released output of an ID block:
    /// (β/θⁿ)·ξ/(k_d+ξ)·(1−e^(−(k_d+ξ)t)) convolved with the occupancy of
    /// the exchanged input. Returns per-interval net changes.
    pub fn id_released(cfg: &CellBlockConfig, input: &SignalTrace) -> Result<SignalTrace> {
        let states = intake(cfg, input);
        let occupancy = interval_average(&states, |x| cfg.drive.occupancy(x));
        let peak = cfg.drive.saturation();
        released_from_production_scale(cfg, input, &occupancy, peak)
    }

    /// Repressor trajectory of a NOT block by explicit convolution of the
    /// production staircase with the decay kernel e^(−k_dR·t), integrated
    /// exactly over each production interval.
    pub fn not_repressor(cfg: &CellBlockConfig, input: &SignalTrace) -> Vec<f64> {
        let ts = input.ts();
        let states = intake(cfg, input);
        let occupancy = interval_average(&states, |x| cfg.drive.occupancy(x));
        let peak = cfg.drive.saturation();
        let k_r = cfg.repressor_decay;
        let gain = if k_r * ts < 1e-8 {
            ts * (1.0 - 0.5 * k_r * ts)
        } else {
            (1.0 - libm::exp(-k_r * ts)) / k_r
        };
        let n = input.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += peak * occupancy[j] * gain * libm::exp(-k_r * ts * (k - j) as f64);
            }
            out.push(acc);
        }
        out
    }

    /// Net released output of a NOT block via the repressed-production
    /// convolution form.
    pub fn not_released(cfg: &CellBlockConfig, input: &SignalTrace) -> Result<SignalTrace> {
        let repression = cfg
            .repression
            .ok_or_else(|| Error::Config("NOT closed form needs repression parameters".into()))?;
        let factors = interval_average(&not_repressor(cfg, input), |r| repression.factor(r));
        released_from_production_scale(cfg, input, &factors, cfg.output_rate)
    }

    /// Convolves a production staircase `scale·profile[j]` (nM/s) with the
    /// release kernel ξ/(k_d+ξ)·(1−e^(−(k_d+ξ)t)), integrating exactly over
    /// each production interval, and differences the accumulated release
    /// into per-interval nets.
    fn released_from_production_scale(
        cfg: &CellBlockConfig,
        input: &SignalTrace,
        profile: &[f64],
        scale: f64,
    ) -> Result<SignalTrace> {
        let ts = input.ts();
        let a = cfg.output_decay + cfg.release_rate;
        // G(τ) = ∫₀^τ g = ξ/a·(τ − (1 − e^(−aτ))/a) for τ ≥ 0.
        let g_int = |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                cfg.release_rate / a * (t - (1.0 - libm::exp(-a * t)) / a)
            }
        };
        let n = input.len();
        let mut accumulated = Vec::with_capacity(n + 1);
        accumulated.push(0.0);
        for m in 1..=n {
            let mut acc = 0.0;
            for j in 0..m {
                let lag = ts * (m - j) as f64;
                acc += scale * profile[j] * (g_int(lag) - g_int(lag - ts));
            }
            accumulated.push(acc);
        }
        let net: Vec<f64> = accumulated
            .windows(2)
            .map(|w| (w[1] - w[0]) * cfg.gain)
            .collect();
        SignalTrace::new(input.t0(), ts, net)
    }
}
