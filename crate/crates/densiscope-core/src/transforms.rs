//! Feature maps of the transformation tree: log quantile densities, centered
//! log-ratios after horizontal alignment, and CDF warping with its SRSF.

use alloc::format;
use alloc::vec::Vec;

use crate::density::{
    cdf_and_quantile, interp, invert_monotone, l2_distance, median_of, mean_of,
    mix_uniform, mode_of, normalized_cdf, trapezoid, clear_uniform, differentiate, DensityFn, GridCurve,
};
use crate::error::{param, Error, Result};
use crate::scalar;

/// Limit applied to ψ before exponentiating.
pub const PSI_CLAMP: f64 = 30.0;

/// Smallest usable width of a common support after alignment.
pub const MIN_SUPPORT: f64 = 0.05;

/// Log quantile density ψ on the probability grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LqdCurve {
    pub curve: GridCurve,
    /// Uniform mixing applied before the transform.
    pub alpha: f64,
}

/// ψ(t) = −log f*(Q*(t)) with f* the density mixed with `alpha` of uniform.
pub fn lqd(f: &DensityFn, alpha: f64) -> Result<LqdCurve> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(param("alpha", alpha));
    }
    let mixed = mix_uniform(f, alpha)?;
    let (_, q) = cdf_and_quantile(f, alpha)?;
    let h = f.step();
    let psi = q.map(|x| -libm::log(interp(mixed.values(), f.start(), h, x)));
    Ok(LqdCurve { curve: psi, alpha })
}

/// ψ divided by its integral over [0, 1].
pub fn nlqd(psi: &LqdCurve) -> Result<LqdCurve> {
    let den = trapezoid(psi.curve.values(), psi.curve.step());
    if !(den.abs() >= 1e-8) {
        return Err(Error::Degenerate(format!("LQD integral {den} too close to zero")));
    }
    Ok(LqdCurve { curve: psi.curve.map(|v| v / den), alpha: psi.alpha })
}

/// Rebuilds a density on [0, 1] from its LQD curve.
///
/// Q(t) = ∫₀ᵗ exp ψ rescaled to end at 1, f*(Q(t)) = exp(−ψ(t)) interpolated
/// back onto the uniform grid and normalized, then `clear_uniform(·, alpha)`.
pub fn inverse_lqd(psi: &LqdCurve, alpha: f64) -> Result<DensityFn> {
    let c = &psi.curve;
    let mut clamped = false;
    let vals: Vec<f64> = c
        .values()
        .iter()
        .map(|&v| {
            if !v.is_finite() || v.abs() > PSI_CLAMP {
                clamped = true;
            }
            if v.is_nan() { 0.0 } else { v.clamp(-PSI_CLAMP, PSI_CLAMP) }
        })
        .collect();
    if clamped {
        log::warn!("LQD values clamped to ±{PSI_CLAMP} before inversion");
    }
    let dens: Vec<f64> = vals.iter().map(|&v| libm::exp(-v)).collect();
    let n = c.len();
    // A density linear between two quantile nodes carries Δt of mass over
    // Δx = 2Δt / (f*_a + f*_b); this inverts the trapezoid CDF of the
    // forward transform, where a trapezoid rule on exp ψ would not.
    let mut q = Vec::with_capacity(n);
    q.push(0.0);
    for i in 1..n {
        q.push(q[i - 1] + 2.0 * c.step() / (dens[i - 1] + dens[i]));
    }
    let total = q[n - 1];
    for v in &mut q {
        *v /= total;
    }
    let x = GridCurve::from_fn(0.0, 1.0, n, |x| x)?;
    let mut out = Vec::with_capacity(n);
    for &xj in x.values() {
        let idx = q.partition_point(|&v| v < xj);
        let v = if idx == 0 {
            dens[0]
        } else if idx >= n {
            dens[n - 1]
        } else {
            let (lo, hi) = (q[idx - 1], q[idx]);
            let frac = if hi > lo { (xj - lo) / (hi - lo) } else { 0.0 };
            dens[idx - 1] + frac * (dens[idx] - dens[idx - 1])
        };
        out.push(v);
    }
    let f_star = DensityFn::normalized(x.with_values(out))?;
    clear_uniform(&f_star, alpha)
}

/// Feature point used to align densities horizontally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeaturePoint {
    Median,
    Mode,
    Mean,
    AvgMedianMode,
}

impl FeaturePoint {
    pub fn of(self, f: &DensityFn) -> f64 {
        match self {
            FeaturePoint::Median => median_of(f),
            FeaturePoint::Mode => mode_of(f),
            FeaturePoint::Mean => mean_of(f),
            FeaturePoint::AvgMedianMode => 0.5 * (median_of(f) + mode_of(f)),
        }
    }
}

/// Densities translated onto a shared support. Values are not renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Centralized {
    pub curves: Vec<GridCurve>,
    pub support: (f64, f64),
    /// Translation applied to each input.
    pub shifts: Vec<f64>,
}

/// Shifts every density so its feature point sits at the median feature
/// point, then resamples all of them on the overlap of the shifted supports.
pub fn h_centralize(fs: &[DensityFn], feature: FeaturePoint) -> Result<Centralized> {
    if fs.is_empty() {
        return Err(Error::TooFew { need: 1, got: 0 });
    }
    let points: Vec<f64> = fs.iter().map(|f| feature.of(f)).collect();
    let target = scalar::median(&points)?;
    let shifts: Vec<f64> = points.iter().map(|p| target - p).collect();
    let mut u = f64::NEG_INFINITY;
    let mut v = f64::INFINITY;
    for (f, s) in fs.iter().zip(&shifts) {
        u = u.max(f.start() + s);
        v = v.min(f.end() + s);
    }
    if !(v - u >= MIN_SUPPORT) {
        return Err(Error::Degenerate(format!("common support [{u}, {v}] is too narrow")));
    }
    let curves = fs
        .iter()
        .zip(&shifts)
        .map(|(f, s)| GridCurve::from_fn(u, v, f.len(), |x| interp(f.values(), f.start(), f.step(), x - s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Centralized { curves, support: (u, v), shifts })
}

fn clr_positive(f: &GridCurve) -> Result<GridCurve> {
    if f.values().iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate("clr needs strictly positive values".into()));
    }
    let logs = f.map(libm::log);
    let mean = trapezoid(logs.values(), logs.step()) / logs.width();
    Ok(logs.map(|v| v - mean))
}

/// Centered log-ratio of a batch of positive curves.
///
/// When the smallest value in the batch is below 0.1 every curve is first
/// mixed as `(1 - alpha_rule) v + alpha_rule`; `alpha_rule = 0` disables this.
pub fn clr_batch(curves: &[GridCurve], alpha_rule: f64) -> Result<Vec<GridCurve>> {
    if !(0.0..1.0).contains(&alpha_rule) {
        return Err(param("alpha_rule", alpha_rule));
    }
    let min = curves.iter().map(GridCurve::min).fold(f64::INFINITY, f64::min);
    let mix = alpha_rule > 0.0 && min < 0.1;
    curves
        .iter()
        .map(|c| {
            if mix {
                clr_positive(&c.map(|v| (1.0 - alpha_rule) * v + alpha_rule))
            } else {
                clr_positive(c)
            }
        })
        .collect()
}

/// [`clr_batch`] for a single curve.
pub fn clr(f: &GridCurve, alpha_rule: f64) -> Result<GridCurve> {
    Ok(clr_batch(core::slice::from_ref(f), alpha_rule)?.remove(0))
}

/// L2 distance between clr images of two positive curves.
pub fn bayes_distance(f: &GridCurve, g: &GridCurve) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::DomainMismatch);
    }
    l2_distance(&clr_positive(f)?, &clr_positive(g)?)
}

/// Warping γ₁₂ = F₁⁻¹∘F₂ and its square-root slope function.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WarpResult {
    pub warp: GridCurve,
    pub srsf: GridCurve,
    /// arccos⟨1, q₁₂⟩, in radians.
    pub distance: f64,
    pub alpha_used: f64,
}

/// Phase distance between two densities on [0, 1].
///
/// If either density dips below 0.1 both are mixed with `alpha_rule` of the
/// uniform first; `alpha_rule = 0` uses the raw CDFs.
pub fn phase_distance(f1: &DensityFn, f2: &DensityFn, alpha_rule: f64) -> Result<WarpResult> {
    if !(0.0..1.0).contains(&alpha_rule) {
        return Err(param("alpha_rule", alpha_rule));
    }
    let alpha = if alpha_rule > 0.0 && f1.min().min(f2.min()) < 0.1 { alpha_rule } else { 0.0 };
    let c1 = normalized_cdf(mix_uniform(f1, alpha)?.curve())?;
    let c2 = normalized_cdf(mix_uniform(f2, alpha)?.curve())?;
    let mut w = warp_from_cdfs(&c1, &c2)?;
    w.alpha_used = alpha;
    Ok(w)
}

/// γ₁₂ = F₁⁻¹∘F₂ computed directly from two CDFs on a common grid.
pub fn warp_from_cdfs(f1: &GridCurve, f2: &GridCurve) -> Result<WarpResult> {
    if !f1.same_grid(f2) {
        return Err(Error::DomainMismatch);
    }
    let (start, h) = (f1.start(), f1.step());
    let warp = f2.map(|t| invert_monotone(f1.values(), start, h, t));
    if warp.values().windows(2).any(|w| w[1] < w[0] - 1e-6) {
        return Err(Error::Degenerate("warping function is not monotone".into()));
    }
    let srsf = differentiate(&warp).map(|d| libm::sqrt(d.max(0.0)));
    let inner = trapezoid(srsf.values(), srsf.step()) / srsf.width();
    let distance = libm::acos(inner.clamp(-1.0, 1.0));
    Ok(WarpResult { warp, srsf, distance, alpha_used: 0.0 })
}

/// Pointwise median of curves sharing one grid.
pub fn pointwise_median(curves: &[GridCurve]) -> Result<GridCurve> {
    let first = curves.first().ok_or(Error::TooFew { need: 1, got: 0 })?;
    if curves.iter().any(|c| !c.same_grid(first)) {
        return Err(Error::DomainMismatch);
    }
    let mut column = Vec::with_capacity(curves.len());
    let values = (0..first.len())
        .map(|j| {
            column.clear();
            column.extend(curves.iter().map(|c| c.values()[j]));
            scalar::median(&column).expect("nonempty")
        })
        .collect();
    Ok(first.with_values(values))
}
