//! The advection-diffusion-reaction channel between consortia.
//!
//! Molecules released uniformly over an emitting surface at x = 0 drift and
//! diffuse down the channel until they reach the partially absorbing cell
//! wall at x = L. The concentration field separates into a Robin eigenmode
//! series along x (eigenvalues λ_l from λ·tan(λL) = G₁, G₁ = k_a/D) and a
//! reflective cosine series across the channel width, with the uniform flow
//! entering through the factor e^(u(2L−ut)/4D).
//!
//! [`build_kernel`] tabulates the surface-to-surface impulse response on the
//! sampling grid. Each (λ_l, γ_i) term decays as a single exponential, so the
//! kernel is stored as exact per-interval integrals rather than point
//! samples; this keeps the first bins meaningful even when the sampling step
//! is coarse relative to the transport time. [`propagate`] then maps an
//! upstream release trace to the per-interval concentration absorbed on a
//! downstream surface.
//!
//! The lateral series carries the 1/γ_i² factors produced by integrating the
//! cosine eigenfunctions over the two surfaces; without them the series does
//! not even converge at small times. The flow factor is the standard
//! small-Péclet approximation and is applied with jointly computed exponents
//! so large u·L/D cannot overflow intermediate terms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{ChannelGeometry, Surface};
use crate::species::SpeciesParams;
use crate::trace::SignalTrace;
use crate::{Error, Result};

/// Residual bound every stored eigenvalue must satisfy.
pub const EIGEN_RESIDUAL_BOUND: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    /// Relative envelope level (evaluated at t = ts) below which series
    /// terms are dropped.
    pub rel_tol: f64,
    pub max_lambda_terms: usize,
    pub max_gamma_terms: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { rel_tol: 1e-12, max_lambda_terms: 2000, max_gamma_terms: 2000 }
    }
}

/// One root of λ·tan(λL) = G₁, carried as its branch index and the offset
/// δ = λL − (l−1)π inside the branch.
///
/// High branches make the product λL large, where a plain f64 evaluation of
/// tan(λL) is dominated by argument round-off. By periodicity
/// tan(λL) = tan(δ), so keeping δ explicitly leaves the eigenvalue condition
/// well-conditioned at every branch.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenRoot {
    /// 1-based branch index l; the root lies in ((l−1)π/L, (l−1/2)π/L).
    pub branch: usize,
    /// Offset of λL above (l−1)π, in (0, π/2).
    pub offset: f64,
    /// The eigenvalue itself (µm⁻¹).
    pub lambda: f64,
}

/// Residual λ·tan(λL) − G₁ evaluated through the branch offset.
pub fn root_residual(root: &EigenRoot, g1: f64) -> f64 {
    root.lambda * libm::tan(root.offset) - g1
}

/// Residual of the eigenvalue condition evaluated naively; only meaningful
/// while λL is small enough that the tangent argument carries full
/// precision.
pub fn eigen_residual(lambda: f64, distance: f64, g1: f64) -> f64 {
    lambda * libm::tan(lambda * distance) - g1
}

/// First `count` positive roots of λ·tan(λL) = G₁, one per branch interval
/// ((l−1)π/L, (l−1/2)π/L).
pub fn solve_eigenvalues(distance: f64, g1: f64, count: usize) -> Result<Vec<f64>> {
    Ok(solve_eigen_roots(distance, g1, count)?.into_iter().map(|r| r.lambda).collect())
}

/// As [`solve_eigenvalues`], keeping the branch-offset representation.
pub fn solve_eigen_roots(distance: f64, g1: f64, count: usize) -> Result<Vec<EigenRoot>> {
    if !(distance > 0.0) {
        return Err(Error::Domain("propagation distance must be positive"));
    }
    if g1 < 0.0 {
        return Err(Error::Domain("G1 must be non-negative"));
    }
    if count == 0 {
        return Err(Error::Domain("at least one eigenvalue is required"));
    }
    let mut roots = Vec::with_capacity(count);
    solve_eigenvalue_range(distance, g1, 1, count, &mut roots)?;
    Ok(roots)
}

/// Extends `roots` with branches `from..=to` (1-based branch index).
fn solve_eigenvalue_range(
    distance: f64,
    g1: f64,
    from: usize,
    to: usize,
    roots: &mut Vec<EigenRoot>,
) -> Result<()> {
    let pi = core::f64::consts::PI;
    for l in from..=to {
        if g1 == 0.0 {
            // Degenerate reflective limit: the branch roots collapse onto the
            // bracket starts (λ₁ = 0 is the uniform mode).
            let lambda = (l as f64 - 1.0) * pi / distance;
            roots.push(EigenRoot { branch: l, offset: 0.0, lambda });
            continue;
        }
        let offset = branch_offset(distance, g1, l)?;
        let lambda = ((l as f64 - 1.0) * pi + offset) / distance;
        roots.push(EigenRoot { branch: l, offset, lambda });
    }
    Ok(())
}

/// Solves h(δ) = ((l−1)π + δ)·sin(δ) − G₁L·cos(δ) = 0 on (0, π/2):
/// bracketed bisection, then Newton polish. All trigonometry acts on the
/// small offset, so the root converges to machine precision on any branch.
fn branch_offset(distance: f64, g1: f64, l: usize) -> Result<f64> {
    let base = (l as f64 - 1.0) * core::f64::consts::PI;
    let gl = g1 * distance;
    let h = |d: f64| (base + d) * libm::sin(d) - gl * libm::cos(d);
    let mut a = 0.0f64;
    let mut b = core::f64::consts::FRAC_PI_2;
    if !(h(a) < 0.0) {
        return Err(Error::Numerical(format!(
            "failed to bracket eigenvalue branch {l}: h(0) = {}",
            h(a)
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if h(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut d = 0.5 * (a + b);
    for _ in 0..6 {
        let hd = h(d);
        let dh = (1.0 + gl) * libm::sin(d) + (base + d) * libm::cos(d);
        if dh == 0.0 {
            break;
        }
        let step = hd / dh;
        let next = d - step;
        if next <= 0.0 || next >= core::f64::consts::FRAC_PI_2 {
            break;
        }
        d = next;
        if step.abs() <= f64::EPSILON * d.max(1e-300) {
            break;
        }
    }
    Ok(d)
}

/// Tabulated surface-to-surface channel response on a sampling grid.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropagationKernel {
    distance: f64,
    emit: Surface,
    absorb: Surface,
    ts: f64,
    /// k_a / (H · absorb width): converts the convolution to absorbed
    /// concentration per interval.
    prefactor: f64,
    /// Exact integrals of the impulse response over each grid interval.
    bins: Vec<f64>,
    lambda_terms: usize,
    gamma_terms: usize,
    // Pieces for point evaluation.
    x_coefs: Vec<f64>,
    lambdas: Vec<f64>,
    lat0: f64,
    lat_coefs: Vec<f64>,
    gammas: Vec<f64>,
    base_decay: f64,
    boost: f64,
    diffusion: f64,
    wall_absorption: f64,
    height: f64,
}

impl PropagationKernel {
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn emit(&self) -> Surface {
        self.emit
    }

    pub fn absorb(&self) -> Surface {
        self.absorb
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Per-interval response integrals (support-truncated).
    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn support_len(&self) -> usize {
        self.bins.len()
    }

    pub fn lambda_terms(&self) -> usize {
        self.lambda_terms
    }

    pub fn gamma_terms(&self) -> usize {
        self.gamma_terms
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambdas
    }

    /// Point value of the impulse response at time `t` > 0.
    pub fn response_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mut lat = self.lat0;
        for (b, g) in self.lat_coefs.iter().zip(&self.gammas) {
            lat += b * libm::exp(-g * g * self.diffusion * t);
        }
        let mut sum = 0.0;
        for (c, l) in self.x_coefs.iter().zip(&self.lambdas) {
            let e = self.boost - (l * l * self.diffusion + self.base_decay) * t;
            sum += c * libm::exp(e);
        }
        (sum * lat).max(0.0)
    }

    /// Fraction of an emitted impulse absorbed on the target surface within
    /// the tabulated support.
    pub fn capture_fraction(&self) -> f64 {
        let total: f64 = self.bins.iter().sum();
        self.wall_absorption * total / (self.height * self.emit.width())
    }
}

/// Builds the kernel for one propagation leg.
pub fn build_kernel(
    distance: f64,
    emit: Surface,
    absorb: Surface,
    species: &SpeciesParams,
    geometry: &ChannelGeometry,
    ts: f64,
    horizon: f64,
    opts: &KernelOptions,
) -> Result<PropagationKernel> {
    geometry.validate()?;
    species.validate()?;
    if !(distance > 0.0) {
        return Err(Error::Domain("propagation distance must be positive"));
    }
    if !(ts > 0.0) || horizon < ts {
        return Err(Error::Domain("kernel needs ts > 0 and horizon >= ts"));
    }
    let width = geometry.width();
    let eps = 1e-9 * width;
    if emit.y_hi > width + eps || absorb.y_hi > width + eps {
        return Err(Error::Domain("surfaces must lie inside the channel"));
    }
    if !(emit.width() > 0.0) {
        return Err(Error::Domain("emitting surface must have positive width"));
    }
    let d = species.diffusion;
    if !(d > 0.0) {
        return Err(Error::Domain("diffusion coefficient must be positive"));
    }
    let u = geometry.flow;
    let k_a = species.wall_absorption;
    let g1 = k_a / d;
    let boost = u * distance / (2.0 * d);
    if boost > 300.0 {
        return Err(Error::Numerical(format!(
            "advective factor exp({boost:.1}) out of range; reduce u*L/D"
        )));
    }
    let base_decay = species.k_d + u * u / (4.0 * d);
    let height = geometry.height;
    let n_bins = libm::ceil(horizon / ts) as usize;

    // Lateral cosine series integrated over both surfaces. The i-th term
    // carries 1/γ² from the two cosine integrals.
    let lat0 = emit.width() * absorb.width();
    let mut gammas = Vec::new();
    let mut lat_coefs = Vec::new();
    {
        let pi = core::f64::consts::PI;
        let mut consecutive_small = 0usize;
        let mut running_max = lat0.abs().max(1e-300);
        let mut lat_ts = lat0;
        for i in 1..=opts.max_gamma_terms {
            let g = i as f64 * pi / width;
            let se = libm::sin(g * emit.y_hi) - libm::sin(g * emit.y_lo);
            let sa = libm::sin(g * absorb.y_hi) - libm::sin(g * absorb.y_lo);
            let coef = 2.0 * se * sa / (g * g);
            let decay_ts = libm::exp(-g * g * d * ts);
            lat_ts += coef * decay_ts;
            running_max = running_max.max(lat_ts.abs());
            // Keep terms that are genuinely nonzero; full-width surfaces
            // produce exact zeros up to sin(iπ) round-off.
            if coef.abs() > 1e-20 * emit.width() * absorb.width() {
                gammas.push(g);
                lat_coefs.push(coef);
            }
            let envelope = 8.0 / (g * g) * decay_ts;
            if envelope < opts.rel_tol * running_max {
                consecutive_small += 1;
                if consecutive_small >= 8 {
                    break;
                }
            } else {
                consecutive_small = 0;
            }
        }
        if gammas.len() == opts.max_gamma_terms {
            log::warn!("lateral series hit the {}-term cap", opts.max_gamma_terms);
        }
    }
    let lat_bound: f64 = lat0.abs() + lat_coefs.iter().map(|c| c.abs()).sum::<f64>();

    let mut bins = vec![0.0f64; n_bins];
    let mut roots: Vec<EigenRoot> = Vec::new();
    let mut x_coefs: Vec<f64> = Vec::new();
    let scale_2h_w = 2.0 * height / width;

    let mut consecutive_small = 0usize;
    let mut running_max_hts = 0.0f64;
    let mut h_ts_sum = 0.0f64;
    let mut mass_sum = 0.0f64;
    let mut branch = 1usize;
    'outer: while branch <= opts.max_lambda_terms {
        let hi_branch = (branch + 63).min(opts.max_lambda_terms);
        let from = roots.len() + 1;
        solve_eigenvalue_range(distance, g1, from, hi_branch, &mut roots)?;
        for l_idx in (from - 1)..hi_branch {
            let lambda = roots[l_idx].lambda;
            let coef = x_mode_coefficient(lambda, distance, g1)?;
            let x_coef = scale_2h_w * coef;
            x_coefs.push(x_coef);

            // Deposit this mode's exact bin integrals, paired with every
            // lateral term (γ = 0 first).
            let mut deposit = |gamma: f64, lat_coef: f64| {
                let r = d * (lambda * lambda + gamma * gamma) + base_decay;
                let amp = x_coef * lat_coef;
                if amp == 0.0 {
                    return;
                }
                let q = libm::exp(-r * ts);
                // Joint exponent: boost − r·t evaluated at the bin start.
                let mut m = amp * (1.0 - q) / r * libm::exp(boost);
                let floor = 1e-18 * lat_bound * scale_2h_w / distance;
                for b in bins.iter_mut() {
                    if m.abs() < floor {
                        break;
                    }
                    *b += m;
                    m *= q;
                }
            };
            deposit(0.0, lat0);
            for (g, c) in gammas.iter().zip(&lat_coefs) {
                deposit(*g, *c);
            }

            // Truncation bookkeeping. Two criteria must both hold: the term
            // is negligible as a point value at t = ts, and its share of the
            // total transported mass is negligible. The second matters
            // because the per-interval integrals converge like an
            // alternating 1/λ² series, far slower than the point values.
            let r0 = d * lambda * lambda + base_decay;
            let term_ts = x_coef * libm::exp(boost - r0 * ts);
            h_ts_sum += term_ts * lat0;
            running_max_hts = running_max_hts.max(h_ts_sum.abs()).max(1e-300);
            let term_mass = x_coef.abs() / r0 * libm::exp(boost) * lat_bound;
            mass_sum += term_mass;
            let envelope = scale_2h_w / distance * lat_bound * libm::exp(boost - r0 * ts);
            let mass_env = scale_2h_w / distance * lat_bound * libm::exp(boost) / r0;
            if envelope < opts.rel_tol * running_max_hts && mass_env < 1e-7 * mass_sum {
                consecutive_small += 1;
                if consecutive_small >= 8 {
                    break 'outer;
                }
            } else {
                consecutive_small = 0;
            }
        }
        branch = hi_branch + 1;
    }
    if roots.len() >= opts.max_lambda_terms {
        log::warn!("eigenmode series hit the {}-term cap", opts.max_lambda_terms);
    }
    if g1 > 0.0 {
        for r in &roots {
            let res = root_residual(r, g1).abs();
            if res > EIGEN_RESIDUAL_BOUND {
                return Err(Error::Numerical(format!(
                    "eigenvalue residual {res:e} exceeds {EIGEN_RESIDUAL_BOUND:e}"
                )));
            }
        }
    }
    let lambdas: Vec<f64> = roots.iter().map(|r| r.lambda).collect();

    // Clamp numerically negative bins and trim the negligible tail.
    let peak = bins.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for b in bins.iter_mut() {
        if *b < 0.0 {
            if *b < worst {
                worst = *b;
            }
            *b = 0.0;
        }
    }
    if peak > 0.0 && worst < -1e-9 * peak {
        log::warn!("kernel bins clamped up from {worst:e} (peak {peak:e})");
    }
    let mut support = bins.len();
    while support > 1 && bins[support - 1] <= 1e-16 * peak {
        support -= 1;
    }
    bins.truncate(support);

    let prefactor = if absorb.width() > 0.0 { k_a / (height * absorb.width()) } else { 0.0 };
    Ok(PropagationKernel {
        distance,
        emit,
        absorb,
        ts,
        prefactor,
        bins,
        lambda_terms: lambdas.len(),
        gamma_terms: gammas.len(),
        x_coefs,
        lambdas,
        lat0,
        lat_coefs,
        gammas,
        base_decay,
        boost,
        diffusion: d,
        wall_absorption: k_a,
        height,
    })
}

/// Normalized x-eigenmode coefficient (λ²+G₁²)·cos(λL) / (L(λ²+G₁²)+G₁).
fn x_mode_coefficient(lambda: f64, distance: f64, g1: f64) -> Result<f64> {
    let s = lambda * lambda + g1 * g1;
    let denom = distance * s + g1;
    if denom == 0.0 {
        // λ = 0 with G₁ = 0: the uniform mode.
        return Ok(1.0 / distance);
    }
    Ok(s * libm::cos(lambda * distance) / denom)
}

/// Absorbed concentration per interval on the kernel's target surface.
pub fn propagate(kernel: &PropagationKernel, input: &SignalTrace) -> Result<SignalTrace> {
    if !(kernel.absorb.width() > 0.0) {
        return Err(Error::Domain("absorbing surface must have positive width"));
    }
    if (input.ts() - kernel.ts).abs() > 1e-12 * kernel.ts {
        return Err(Error::Grid("input trace and kernel use different steps"));
    }
    let n = input.len();
    let mut out = vec![0.0f64; n];
    let x = input.values();
    for (d, &b) in kernel.bins.iter().enumerate() {
        if d >= n {
            break;
        }
        let w = kernel.prefactor * b;
        if w == 0.0 {
            continue;
        }
        let (head, tail) = out.split_at_mut(d);
        let _ = head;
        for (o, &v) in tail.iter_mut().zip(&x[..n - d]) {
            *o += w * v;
        }
    }
    let mut trace = SignalTrace::new(input.t0(), input.ts(), out)?;
    trace.clamp_non_negative(crate::trace::CLAMP_WARN_LEVEL);
    Ok(trace)
}
