//! Grid curves, densities and the numerical calculus on them.
//!
//! Every curve is sampled at `N` equispaced points including both endpoints.
//! Integrals are composite trapezoid sums and evaluation between nodes is
//! linear interpolation.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{param, Error, Result};

/// Default number of grid points.
pub const GRID_SIZE: usize = 512;

/// Tolerance on the unit integral of a [`DensityFn`].
pub const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridCurve {
    start: f64,
    end: f64,
    values: Vec<f64>,
}

impl GridCurve {
    pub fn new(start: f64, end: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {}", values.len())));
        }
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidGrid(format!("bad domain [{start}, {end}]")));
        }
        Ok(Self { start, end, values })
    }

    pub fn from_fn(start: f64, end: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {n}")));
        }
        let h = (end - start) / (n - 1) as f64;
        let values = (0..n).map(|i| f(node(start, end, h, i, n))).collect();
        Self::new(start, end, values)
    }

    /// Samples `f` on the default grid over [0, 1].
    pub fn unit(f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(0.0, 1.0, GRID_SIZE, f).expect("default grid is valid")
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
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

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.values.len() - 1) as f64
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    /// Abscissa of node `i`.
    pub fn x(&self, i: usize) -> f64 {
        node(self.start, self.end, self.step(), i, self.values.len())
    }

    pub fn abscissas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.x(i))
    }

    pub fn same_grid(&self, other: &GridCurve) -> bool {
        self.values.len() == other.values.len()
            && (self.start - other.start).abs() <= 1e-12
            && (self.end - other.end).abs() <= 1e-12
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let tol = 1e-12 * self.width().max(1.0);
        if x < self.start - tol || x > self.end + tol {
            return Err(Error::OutOfDomain { x, start: self.start, end: self.end });
        }
        Ok(interp(&self.values, self.start, self.step(), x))
    }

    /// Same grid, values mapped pointwise.
    pub fn map(&self, f: impl FnMut(f64) -> f64) -> GridCurve {
        GridCurve { start: self.start, end: self.end, values: self.values.iter().copied().map(f).collect() }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> GridCurve {
        debug_assert_eq!(values.len(), self.values.len());
        GridCurve { start: self.start, end: self.end, values }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn node(start: f64, end: f64, h: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        end
    } else {
        start + h * i as f64
    }
}

/// Linear interpolation of equispaced samples; `x` is clamped into range.
pub(crate) fn interp(values: &[f64], start: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    let s = ((x - start) / h).clamp(0.0, (n - 1) as f64);
    let j = (s as usize).min(n - 2);
    let frac = s - j as f64;
    values[j] + frac * (values[j + 1] - values[j])
}

/// Trapezoid weights for `n` nodes spaced `h` apart.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = alloc::vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// Running trapezoid integral, starting at 0.
pub(crate) fn cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Smallest abscissa where the nondecreasing samples `cdf` reach `t`,
/// interpolated linearly between the bracketing nodes.
pub(crate) fn invert_monotone(cdf: &[f64], start: f64, h: f64, t: f64) -> f64 {
    let n = cdf.len();
    let idx = cdf.partition_point(|&v| v < t);
    if idx == 0 {
        return start;
    }
    if idx >= n {
        return start + h * (n - 1) as f64;
    }
    let j = idx - 1;
    let (lo, hi) = (cdf[j], cdf[idx]);
    let frac = if hi > lo { (t - lo) / (hi - lo) } else { 0.0 };
    start + h * (j as f64 + frac)
}

/// Integral of the piecewise-linear interpolant of `values` over `[a, b]`.
/// With `a`, `b` on nodes this is the composite trapezoid rule.
pub(crate) fn integrate_range(values: &[f64], start: f64, h: f64, a: f64, b: f64) -> f64 {
    let n = values.len();
    let sa = ((a - start) / h).clamp(0.0, (n - 1) as f64);
    let sb = ((b - start) / h).clamp(0.0, (n - 1) as f64);
    if sb <= sa {
        return 0.0;
    }
    let at = |s: f64| {
        let j = (s as usize).min(n - 2);
        values[j] + (s - j as f64) * (values[j + 1] - values[j])
    };
    let first = (libm::floor(sa) as usize).min(n - 2);
    let last = (libm::ceil(sb) as usize).clamp(1, n - 1);
    let mut total = 0.0;
    for k in first..last {
        let lo = sa.max(k as f64);
        let hi = sb.min((k + 1) as f64);
        if hi > lo {
            total += 0.5 * (hi - lo) * (at(lo) + at(hi));
        }
    }
    total * h
}

/// Quadrature weights `w` with `Σ w_j v_j` equal to [`integrate_range`].
pub(crate) fn region_weights(n: usize, start: f64, h: f64, a: f64, b: f64) -> Vec<f64> {
    let mut w = alloc::vec![0.0; n];
    let sa = ((a - start) / h).clamp(0.0, (n - 1) as f64);
    let sb = ((b - start) / h).clamp(0.0, (n - 1) as f64);
    if sb <= sa {
        return w;
    }
    let first = (libm::floor(sa) as usize).min(n - 2);
    let last = (libm::ceil(sb) as usize).clamp(1, n - 1);
    for k in first..last {
        let lo = sa.max(k as f64);
        let hi = sb.min((k + 1) as f64);
        if hi > lo {
            let half = 0.5 * (hi - lo) * h;
            for s in [lo, hi] {
                let frac = s - k as f64;
                w[k] += half * (1.0 - frac);
                w[k + 1] += half * frac;
            }
        }
    }
    w
}

pub(crate) fn check_region(curve: &GridCurve, region: (f64, f64)) -> Result<()> {
    let tol = 1e-12 * curve.width().max(1.0);
    let (a, b) = region;
    if !(a < b) {
        return Err(Error::Degenerate(format!("empty region [{a}, {b}]")));
    }
    if a < curve.start - tol {
        return Err(Error::OutOfDomain { x: a, start: curve.start, end: curve.end });
    }
    if b > curve.end + tol {
        return Err(Error::OutOfDomain { x: b, start: curve.start, end: curve.end });
    }
    Ok(())
}

/// A nonnegative grid curve with unit trapezoid integral.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "GridCurve", into = "GridCurve"))]
pub struct DensityFn(GridCurve);

impl DensityFn {
    /// Validates nonnegativity and the unit integral.
    pub fn new(curve: GridCurve) -> Result<Self> {
        if curve.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NotADensity("negative or non-finite value".into()));
        }
        let mass = trapezoid(&curve.values, curve.step());
        if (mass - 1.0).abs() > NORM_TOL {
            return Err(Error::NotADensity(format!("integral is {mass}")));
        }
        Ok(Self(curve))
    }

    /// Rescales a nonnegative curve to unit integral.
    pub fn normalized(curve: GridCurve) -> Result<Self> {
        if curve.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NotADensity("negative or non-finite value".into()));
        }
        let mass = trapezoid(&curve.values, curve.step());
        if !(mass > 1e-300) {
            return Err(Error::NotADensity("zero mass".into()));
        }
        let scaled = curve.map(|v| v / mass);
        Ok(Self(scaled))
    }

    /// Samples and normalizes `f` on the default grid over [0, 1].
    pub fn from_unit_fn(f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::normalized(GridCurve::unit(f))
    }

    pub fn uniform(n: usize) -> Self {
        Self(GridCurve::from_fn(0.0, 1.0, n, |_| 1.0).expect("n >= 3"))
    }

    pub fn curve(&self) -> &GridCurve {
        &self.0
    }

    pub fn into_curve(self) -> GridCurve {
        self.0
    }
}

impl Deref for DensityFn {
    type Target = GridCurve;
    fn deref(&self) -> &GridCurve {
        &self.0
    }
}

impl AsRef<GridCurve> for DensityFn {
    fn as_ref(&self) -> &GridCurve {
        &self.0
    }
}

impl TryFrom<GridCurve> for DensityFn {
    type Error = Error;
    fn try_from(curve: GridCurve) -> Result<Self> {
        Self::new(curve)
    }
}

impl From<DensityFn> for GridCurve {
    fn from(f: DensityFn) -> GridCurve {
        f.0
    }
}

/// Trapezoid integral over the whole domain or over `sub_interval`.
pub fn integrate(curve: &GridCurve, sub_interval: Option<(f64, f64)>) -> Result<f64> {
    match sub_interval {
        None => Ok(trapezoid(&curve.values, curve.step())),
        Some(region) => {
            check_region(curve, region)?;
            Ok(integrate_range(&curve.values, curve.start, curve.step(), region.0, region.1))
        }
    }
}

/// Central differences inside, one-sided differences at both ends.
pub fn differentiate(curve: &GridCurve) -> GridCurve {
    let v = &curve.values;
    let n = v.len();
    let h = curve.step();
    let mut d = Vec::with_capacity(n);
    d.push((v[1] - v[0]) / h);
    for i in 1..n - 1 {
        d.push((v[i + 1] - v[i - 1]) / (2.0 * h));
    }
    d.push((v[n - 1] - v[n - 2]) / h);
    curve.with_values(d)
}

fn check_unit_domain(f: &GridCurve) -> Result<()> {
    if f.start.abs() > 1e-12 || (f.end - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidGrid(format!("expected domain [0, 1], got [{}, {}]", f.start, f.end)));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(param("alpha", alpha));
    }
    Ok(())
}

/// `(1 - alpha) f + alpha`.
pub fn mix_uniform(f: &DensityFn, alpha: f64) -> Result<DensityFn> {
    check_alpha(alpha)?;
    check_unit_domain(f)?;
    Ok(DensityFn(f.map(|v| (1.0 - alpha) * v + alpha)))
}

/// Undoes [`mix_uniform`]: `|f* - alpha| / (1 - alpha)`, renormalized.
pub fn clear_uniform(f_star: &DensityFn, alpha: f64) -> Result<DensityFn> {
    check_alpha(alpha)?;
    let raw = f_star.map(|v| (v - alpha).abs() / (1.0 - alpha));
    let w = trapezoid(&raw.values, raw.step());
    if !(w >= 1e-12) {
        return Err(Error::Degenerate("nothing left after clearing the uniform component".into()));
    }
    Ok(DensityFn(raw.map(|v| v / w)))
}

/// CDF and quantile function of `mix_uniform(f, alpha)`.
///
/// The CDF is the running trapezoid integral scaled to end at exactly 1; the
/// quantile lives on a probability grid with as many points as `f`.
pub fn cdf_and_quantile(f: &DensityFn, alpha: f64) -> Result<(GridCurve, GridCurve)> {
    let mixed = mix_uniform(f, alpha)?;
    let cdf = normalized_cdf(&mixed)?;
    let n = f.len();
    let h = f.step();
    let q = GridCurve::from_fn(0.0, 1.0, n, |t| invert_monotone(cdf.values(), f.start, h, t))?;
    Ok((cdf, q))
}

pub(crate) fn normalized_cdf(f: &GridCurve) -> Result<GridCurve> {
    let mut c = cumulative(&f.values, f.step());
    if c.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::NotADensity("cumulative integral decreases".into()));
    }
    let total = *c.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::NotADensity("zero mass".into()));
    }
    for v in &mut c {
        *v /= total;
    }
    *c.last_mut().unwrap() = 1.0;
    Ok(f.with_values(c))
}

pub fn median_of(f: &DensityFn) -> f64 {
    let c = cumulative(&f.values, f.step());
    let total = *c.last().unwrap();
    invert_monotone(&c, f.start, f.step(), 0.5 * total)
}

/// Abscissa of the largest value, leftmost on ties.
pub fn mode_of(f: &DensityFn) -> f64 {
    let mut best = 0;
    for (i, &v) in f.values.iter().enumerate() {
        if v > f.values[best] {
            best = i;
        }
    }
    f.x(best)
}

/// Mean of the distribution.
pub fn mean_of(f: &DensityFn) -> f64 {
    let xf: Vec<f64> = f.abscissas().zip(&f.values).map(|(x, v)| x * v).collect();
    trapezoid(&xf, f.step())
}

/// L1 distance between curves on the same grid.
pub fn l1_distance(a: &GridCurve, b: &GridCurve) -> Result<f64> {
    same_domain(a, b)?;
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    Ok(trapezoid(&d, a.step()))
}

/// L2 distance between curves on the same grid.
pub fn l2_distance(a: &GridCurve, b: &GridCurve) -> Result<f64> {
    same_domain(a, b)?;
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).collect();
    Ok(libm::sqrt(trapezoid(&d, a.step())))
}

pub(crate) fn same_domain(a: &GridCurve, b: &GridCurve) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}
