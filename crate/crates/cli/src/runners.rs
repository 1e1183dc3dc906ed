//! Experiment drivers shared by the CLI subcommands and the acceptance
//! suite.

use anyhow::{anyhow, bail, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use csk_core::cascade::{self, TraceRetention};
use csk_core::scenario::Scenario;
use csk_core::stochastic::{
    realization_seed, run_realization, EnsembleAccumulator, EnsembleStats,
};
use csk_core::units::MOLECULES_PER_NM_UM3;

use crate::output::BerRow;

/// Runs the requested number of realizations across threads, folding the
/// results in realization order so the statistics are identical no matter
/// how many workers ran.
pub fn run_ensemble(scenario: &Scenario, realizations: usize, seed: u64) -> Result<EnsembleStats> {
    let outputs: Vec<_> = (0..realizations)
        .into_par_iter()
        .map(|r| run_realization(scenario, realization_seed(seed, r)))
        .collect::<core::result::Result<_, _>>()
        .map_err(|e| anyhow!("stochastic run failed: {e}"))?;
    let mut acc = EnsembleAccumulator::new();
    for out in &outputs {
        acc.push(out);
    }
    Ok(acc.finish())
}

/// One compared series in a validation run.
#[derive(Debug, Clone)]
pub struct SeriesCheck {
    pub name: String,
    pub checked: usize,
    pub within: usize,
    pub required: usize,
}

impl SeriesCheck {
    pub fn passed(&self) -> bool {
        self.within >= self.required
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub realizations: usize,
    pub census_violations: u64,
    pub series: Vec<SeriesCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.census_violations == 0 && self.series.iter().all(|s| s.passed())
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "validation over {} realizations; census violations: {}\n",
            self.realizations, self.census_violations
        );
        for c in &self.series {
            s.push_str(&format!(
                "  {}: {}/{} decimated samples within 3 SE (needed {}) -> {}\n",
                c.name,
                c.within,
                c.checked,
                c.required,
                if c.passed() { "pass" } else { "FAIL" }
            ));
        }
        s.push_str(if self.passed() { "PASS\n" } else { "FAIL\n" });
        s
    }
}

/// Compares the analytic cascade against the stochastic ensemble at every
/// `decimate`-th sample: the analytic value must lie within three standard
/// errors of the ensemble mean at 95% of the compared samples.
///
/// Comparisons run in molecule counts per interval. The standard error is
/// floored at the one-molecule-per-ensemble resolution so empty bins cannot
/// produce spurious infinite-precision requirements.
pub fn validate_against_stochastic(
    scenario: &Scenario,
    realizations: usize,
    seed: u64,
    decimate: usize,
) -> Result<ValidationReport> {
    let analytic = cascade::evaluate(scenario, TraceRetention::All)
        .map_err(|e| anyhow!("analytic evaluation failed: {e}"))?;
    let stats = run_ensemble(scenario, realizations, seed)?;
    let floor = 1.0 / realizations as f64;
    let mut series = Vec::new();

    let mut compare = |name: &str, ana_counts: Vec<f64>, mean: &[f64], se: &[f64]| {
        // Skip identically-silent series; count the active region only (the
        // long pre-arrival stretch would dilute the statistic).
        let total: f64 = ana_counts.iter().sum();
        if total == 0.0 {
            let live = mean.iter().any(|&m| m != 0.0);
            series.push(SeriesCheck {
                name: name.into(),
                checked: 1,
                within: if live { 0 } else { 1 },
                required: 1,
            });
            return;
        }
        let threshold = 1e-4 * ana_counts.iter().cloned().fold(0.0f64, f64::max);
        let mut checked = 0usize;
        let mut within = 0usize;
        for k in (0..ana_counts.len()).step_by(decimate.max(1)) {
            if ana_counts[k] < threshold && mean[k] == 0.0 {
                continue;
            }
            checked += 1;
            if (ana_counts[k] - mean[k]).abs() <= 3.0 * se[k].max(floor) {
                within += 1;
            }
        }
        // 95% coverage; with few compared samples a single 3-SE outlier is
        // expected noise, not a failure.
        let required = if checked < 40 {
            checked.saturating_sub(1)
        } else {
            (0.95 * checked as f64).ceil() as usize
        };
        series.push(SeriesCheck { name: name.into(), checked, within, required });
    };

    for (pi, pop) in scenario.layout.populations.iter().enumerate() {
        let _ = pi;
        let volume = scenario.lane_volume(&pop.lane);
        let ana = &analytic.outputs[&pop.name];
        let counts: Vec<f64> =
            ana.values().iter().map(|nm| nm * volume * MOLECULES_PER_NM_UM3).collect();
        let (mean, se) = &stats.released[&pop.name];
        compare(&pop.name, counts, mean, se);
    }
    for sink in &scenario.layout.sinks {
        let volume = scenario.lane_volume(&sink.lane);
        let ana = &analytic.sinks[&sink.name];
        let counts: Vec<f64> =
            ana.values().iter().map(|nm| nm * volume * MOLECULES_PER_NM_UM3).collect();
        let (mean, se) = &stats.sinks[&sink.name];
        compare(&sink.name, counts, mean, se);
    }

    Ok(ValidationReport {
        realizations,
        census_violations: stats.census.violations,
        series,
    })
}

/// Random-symbol transmission and threshold sweep.
pub struct BerExperiment {
    pub rows: Vec<BerRow>,
    pub symbols: Vec<u8>,
    /// Windowed molecule counts per (sink, symbol slot).
    pub counts: Vec<(String, Vec<f64>)>,
    /// Fraction of transmitted zero and one bits.
    pub zero_fraction: f64,
    pub one_fraction: f64,
}

/// Transmits `bits` random bits as symbols at interval `t_b`, samples every
/// sink `sample_offset` after each transmission and sweeps the detection
/// threshold grid.
pub fn ber_experiment(
    template: &Scenario,
    t_b: f64,
    bits: usize,
    n_d_grid: &[f64],
    seed: u64,
    sample_offset: f64,
    decision_window: f64,
) -> Result<BerExperiment> {
    let bits_per_symbol = template.layout.sources.len();
    if bits_per_symbol == 0 || bits_per_symbol > 8 {
        bail!("layout must have between 1 and 8 source lines");
    }
    if bits < 16 {
        bail!("need at least 16 bits for a bit-error-rate estimate");
    }
    if bits % bits_per_symbol != 0 {
        bail!("bit count must be a multiple of {bits_per_symbol}");
    }
    let n_symbols = bits / bits_per_symbol;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols: Vec<u8> =
        (0..n_symbols).map(|_| rng.random_range(0..(1u16 << bits_per_symbol)) as u8).collect();

    let mut scenario = template.clone();
    scenario.schedule.symbols = symbols.clone();
    scenario.schedule.period = t_b;
    let last_sample =
        scenario.schedule.start + (n_symbols - 1) as f64 * t_b + sample_offset;
    scenario.horizon = last_sample + 0.5 * decision_window + 2.0 * scenario.ts;
    scenario
        .validate()
        .map_err(|e| anyhow!("bit-error-rate scenario invalid: {e}"))?;

    let out = cascade::evaluate(&scenario, TraceRetention::SinksOnly)
        .map_err(|e| anyhow!("analytic evaluation failed: {e}"))?;

    let sample_times: Vec<f64> = (0..n_symbols)
        .map(|i| scenario.schedule.start + i as f64 * t_b + sample_offset)
        .collect();

    let mut counts = Vec::new();
    for sink in &scenario.layout.sinks {
        let volume = scenario.lane_volume(&sink.lane);
        let trace = &out.sinks[&sink.name];
        let c: Vec<f64> = sample_times
            .iter()
            .map(|&t| cascade::window_count(trace, volume, t, decision_window))
            .collect::<core::result::Result<_, _>>()
            .map_err(|e| anyhow!("sampling failed: {e}"))?;
        counts.push((sink.name.clone(), c));
    }

    let mut ones = 0usize;
    for (si, &sym) in symbols.iter().enumerate() {
        let _ = si;
        for sink in &scenario.layout.sinks {
            if (sym >> sink.bit) & 1 == 1 {
                ones += 1;
            }
        }
    }
    let total_bits = n_symbols * bits_per_symbol;

    let mut rows = Vec::new();
    for &n_d in n_d_grid {
        let mut errors = 0usize;
        for (sink, c) in scenario.layout.sinks.iter().zip(&counts) {
            for (i, &sym) in symbols.iter().enumerate() {
                let truth = (sym >> sink.bit) & 1 == 1;
                let decided = c.1[i] > n_d;
                if decided != truth {
                    errors += 1;
                }
            }
        }
        rows.push(BerRow { n_d, t_b, errors, bits: total_bits });
    }

    Ok(BerExperiment {
        rows,
        symbols,
        counts,
        zero_fraction: (total_bits - ones) as f64 / total_bits as f64,
        one_fraction: ones as f64 / total_bits as f64,
    })
}
