//! Uniformly sampled concentration-vs-time series.
//!
//! Every engine produces and consumes traces on one grid fixed per scenario:
//! sample `k` covers the interval `[t0 + k·ts, t0 + (k+1)·ts)`. Depending on
//! context a sample is an instantaneous level (inputs, threshold molecules)
//! or the net amount moved during the interval (operator outputs); the two
//! are never mixed on one trace.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Relative tolerance used when checking that two grids coincide.
const GRID_TOL: f64 = 1e-12;

/// Negative values below this magnitude (nM) trigger a diagnostic when
/// clamped; smaller residue is silently zeroed.
pub const CLAMP_WARN_LEVEL: f64 = 1e-9;

/// Default clamp tolerance for floating-point residue (nM).
pub const CLAMP_DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignalTrace {
    t0: f64,
    ts: f64,
    values: Vec<f64>,
}

impl SignalTrace {
    pub fn new(t0: f64, ts: f64, values: Vec<f64>) -> Result<Self> {
        if !(ts > 0.0) || !ts.is_finite() || !t0.is_finite() {
            return Err(Error::Domain("trace needs finite t0 and positive ts"));
        }
        Ok(SignalTrace { t0, ts, values })
    }

    pub fn zeros(t0: f64, ts: f64, len: usize) -> Result<Self> {
        Self::new(t0, ts, vec![0.0; len])
    }

    pub fn constant(t0: f64, ts: f64, len: usize, value: f64) -> Result<Self> {
        Self::new(t0, ts, vec![value; len])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + self.ts * k as f64
    }

    /// Index of the interval containing time `t`, if inside the trace.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        if t < self.t0 {
            return None;
        }
        let k = libm::floor((t - self.t0) / self.ts) as usize;
        (k < self.values.len()).then_some(k)
    }

    /// True when the grids coincide (t0 and ts equal within tolerance).
    pub fn same_grid(&self, other: &SignalTrace) -> bool {
        let ts_ok = (self.ts - other.ts).abs() <= GRID_TOL * self.ts;
        let scale = self.ts.max(self.t0.abs()).max(other.t0.abs());
        let t0_ok = (self.t0 - other.t0).abs() <= GRID_TOL * scale;
        ts_ok && t0_ok
    }

    /// Pointwise sum; both traces must share grid and length.
    pub fn try_add(&self, other: &SignalTrace) -> Result<SignalTrace> {
        if !self.same_grid(other) || self.len() != other.len() {
            return Err(Error::Grid("trace sum requires matching t0, ts and length"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        SignalTrace::new(self.t0, self.ts, values)
    }

    pub fn add_assign_trace(&mut self, other: &SignalTrace) -> Result<()> {
        if !self.same_grid(other) || self.len() != other.len() {
            return Err(Error::Grid("trace sum requires matching t0, ts and length"));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0f64, f64::max)
    }

    /// Index and value of the largest sample.
    pub fn peak(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in self.values.iter().enumerate() {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Clamps tiny negative floating-point residue to zero.
    ///
    /// Values in `(-warn_level, 0)` are zeroed silently; anything at or below
    /// `-warn_level` is still clamped but logged, since it points at a real
    /// numerical problem rather than round-off. Returns how many samples were
    /// touched.
    pub fn clamp_non_negative(&mut self, warn_level: f64) -> usize {
        let mut clamped = 0usize;
        let mut worst = 0.0f64;
        for v in &mut self.values {
            if *v < 0.0 {
                if *v < worst {
                    worst = *v;
                }
                *v = 0.0;
                clamped += 1;
            }
        }
        if worst <= -warn_level {
            log::warn!("clamped negative trace residue down to {worst:e} nM");
        }
        clamped
    }

    /// Resamples onto a grid whose step is an integer multiple or divisor of
    /// the current one. Refinement interpolates linearly, coarsening keeps
    /// the left sample of each group; shared grid points are preserved
    /// exactly.
    pub fn resample(&self, new_ts: f64) -> Result<SignalTrace> {
        if !(new_ts > 0.0) {
            return Err(Error::Domain("resample step must be positive"));
        }
        let ratio = self.ts / new_ts;
        if ratio >= 1.0 {
            let f = round_to_integer(ratio)
                .ok_or(Error::Grid("resample step must divide the current step"))?;
            if f == 1 {
                return Ok(self.clone());
            }
            if self.values.is_empty() {
                return SignalTrace::new(self.t0, new_ts, Vec::new());
            }
            let n = (self.values.len() - 1) * f + 1;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let j = i / f;
                let r = i % f;
                if r == 0 {
                    out.push(self.values[j]);
                } else {
                    let a = self.values[j];
                    let b = self.values[j + 1];
                    out.push(a + (b - a) * (r as f64 / f as f64));
                }
            }
            SignalTrace::new(self.t0, self.ts / f as f64, out)
        } else {
            let f = round_to_integer(1.0 / ratio)
                .ok_or(Error::Grid("resample step must be a multiple of the current step"))?;
            let out = self.values.iter().copied().step_by(f).collect();
            SignalTrace::new(self.t0, self.ts * f as f64, out)
        }
    }
}

fn round_to_integer(x: f64) -> Option<usize> {
    let r = libm::round(x);
    if r >= 1.0 && (x - r).abs() <= 1e-9 * r {
        Some(r as usize)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp() -> SignalTrace {
        // 0..1 over 1 s at ts = 0.1 (11 samples).
        let v = (0..11).map(|i| i as f64 / 10.0).collect();
        SignalTrace::new(0.0, 0.1, v).unwrap()
    }

    #[test]
    fn constant_trace_survives_resampling() {
        let t = SignalTrace::constant(0.0, 0.2, 9, 5.0).unwrap();
        for new_ts in [0.1, 0.05, 0.4] {
            let r = t.resample(new_ts).unwrap();
            assert!(r.values().iter().all(|&v| v == 5.0));
        }
    }

    #[test]
    fn refine_then_coarsen_round_trips() {
        let t = ramp();
        let back = t.resample(0.025).unwrap().resample(0.1).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn refined_ramp_midpoints_average_neighbours() {
        let t = ramp();
        let r = t.resample(0.05).unwrap();
        assert_eq!(r.len(), 21);
        for j in 0..10 {
            let mid = r.values()[2 * j + 1];
            let want = 0.5 * (t.values()[j] + t.values()[j + 1]);
            assert!((mid - want).abs() < 1e-15);
        }
    }

    #[test]
    fn incompatible_steps_rejected() {
        assert!(ramp().resample(0.07).is_err());
        assert!(ramp().resample(0.15).is_err());
    }

    #[test]
    fn mismatched_grids_do_not_add() {
        let a = SignalTrace::zeros(0.0, 0.1, 4).unwrap();
        let b = SignalTrace::zeros(0.5, 0.1, 4).unwrap();
        assert!(a.try_add(&b).is_err());
    }

    #[test]
    fn clamp_reports_touched_samples() {
        let mut t = SignalTrace::new(0.0, 1.0, vec![1.0, -1e-13, -1e-8, 2.0]).unwrap();
        assert_eq!(t.clamp_non_negative(CLAMP_WARN_LEVEL), 2);
        assert_eq!(t.values(), &[1.0, 0.0, 0.0, 2.0]);
    }

    proptest! {
        #[test]
        fn sum_commutes_and_preserves_non_negativity(
            a in proptest::collection::vec(0.0f64..1e6, 1..40),
            b_seed in proptest::collection::vec(0.0f64..1e6, 1..40),
        ) {
            let n = a.len().min(b_seed.len());
            let ta = SignalTrace::new(1.0, 0.5, a[..n].to_vec()).unwrap();
            let tb = SignalTrace::new(1.0, 0.5, b_seed[..n].to_vec()).unwrap();
            let ab = ta.try_add(&tb).unwrap();
            let ba = tb.try_add(&ta).unwrap();
            prop_assert_eq!(&ab, &ba);
            prop_assert!(ab.values().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn sum_is_associative(
            vals in proptest::collection::vec(0.0f64..1e3, 3..30),
        ) {
            let n = vals.len();
            let t = |off: f64| {
                let v: Vec<f64> = vals.iter().map(|x| x + off).collect();
                SignalTrace::new(0.0, 0.01, v[..n].to_vec()).unwrap()
            };
            let (x, y, z) = (t(0.0), t(1.0), t(2.0));
            let l = x.try_add(&y).unwrap().try_add(&z).unwrap();
            let r = x.try_add(&y.try_add(&z).unwrap()).unwrap();
            for (a, b) in l.values().iter().zip(r.values()) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn refine_coarsen_round_trip_is_exact(
            vals in proptest::collection::vec(0.0f64..1e4, 2..50),
            factor in 2usize..6,
        ) {
            let t = SignalTrace::new(0.25, 0.2, vals).unwrap();
            let fine = t.resample(0.2 / factor as f64).unwrap();
            let back = fine.resample(0.2).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
