//! Synthetic density datasets and the contamination schemes used to plant
//! outliers in them.
//!
//! Everything is a pure function of its parameters and a [`RandomStream`].

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::density::{l2_distance, mode_of, DensityFn, GridCurve};
use crate::error::{param, Error, Result};
use crate::scalar::percentile;
use crate::transforms::pointwise_median;

/// Attempts allowed for rejection loops (noise resampling, disjoint
/// contamination).
pub const RETRY_BUDGET: usize = 1000;

/// Seeded ChaCha8 stream. [`split`](Self::split) derives independent
/// substreams, one per repetition.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Substream `id` of this seed; independent of the parent's position.
    pub fn split(&self, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id.wrapping_add(1));
        Self { seed: self.seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// U(lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    /// N(mean, sd²).
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        mean + sd * z
    }

    /// Uniform index below `n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// `k` distinct elements of `pool`, in random order.
    pub fn choose_distinct(&mut self, pool: &[usize], k: usize) -> Vec<usize> {
        index::sample(&mut self.rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
    }
}

/// Beta(a, b) density on the default grid, renormalized by the trapezoid rule.
pub fn beta_pdf(a: f64, b: f64) -> Result<DensityFn> {
    if !(a >= 1.0) {
        return Err(param("a", a));
    }
    if !(b >= 1.0) {
        return Err(param("b", b));
    }
    let log_norm = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b);
    let term = |p: f64, x: f64| if p == 1.0 { 0.0 } else { (p - 1.0) * libm::log(x) };
    DensityFn::from_unit_fn(|x| libm::exp(log_norm + term(a, x) + term(b, 1.0 - x)))
}

/// Generalized Pareto density truncated to [0, 1].
pub fn tgpd_pdf(kappa: f64, sigma: f64) -> Result<DensityFn> {
    if !(kappa > 0.0) {
        return Err(param("kappa", kappa));
    }
    if !(sigma > 0.0) {
        return Err(param("sigma", sigma));
    }
    DensityFn::from_unit_fn(|x| libm::pow(1.0 + kappa * x / sigma, -1.0 - 1.0 / kappa) / sigma)
}

fn convex(w: f64, f: &DensityFn, g: &DensityFn) -> DensityFn {
    let v: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| w * a + (1.0 - w) * b).collect();
    DensityFn::new(GridCurve::new(f.start(), f.end(), v).expect("same grid")).expect("convex combination of densities")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scenario {
    I,
    II,
}

impl Scenario {
    /// (κ, σ) of the truncated GPD component.
    pub fn gpd(self) -> (f64, f64) {
        match self {
            Scenario::I => (2.0, 4.0),
            Scenario::II => (0.5, 0.5),
        }
    }
}

/// Mixing weight η of the tGPD component for models I to IV.
pub const MODEL_ETA: [f64; 4] = [0.0, 0.15, 0.30, 0.45];

/// `(1 − η) Beta(a, b) + η tGPD` with a ~ U(10, 35), b ~ U(14, 20).
pub fn gen_scenario_pdfs(n: usize, scenario: Scenario, eta: f64, rng: &mut RandomStream) -> Result<Vec<DensityFn>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(param("eta", eta));
    }
    let (kappa, sigma) = scenario.gpd();
    let tail = tgpd_pdf(kappa, sigma)?;
    (0..n)
        .map(|_| {
            let a = rng.uniform(10.0, 35.0);
            let b = rng.uniform(14.0, 20.0);
            Ok(convex(1.0 - eta, &beta_pdf(a, b)?, &tail))
        })
        .collect()
}

/// Beta(a_i, b_i) with a_i ~ U(δ₁, δ₂) and b the ascending sort of the same
/// sample.
pub fn gen_beta_sorted(n: usize, delta1: f64, delta2: f64, rng: &mut RandomStream) -> Result<Vec<DensityFn>> {
    if !(delta1 >= 1.0 && delta2 > delta1) {
        return Err(param("delta2", delta2));
    }
    let a: Vec<f64> = (0..n).map(|_| rng.uniform(delta1, delta2)).collect();
    let mut b = a.clone();
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(&a, &b)| beta_pdf(a, b)).collect()
}

/// Replaces `n_out` densities at distinct random positions by planted
/// outliers and returns the positions, sorted.
///
/// With probability `1 − zeta_hs` an outlier is a shape outlier: a ϱ/(1−ϱ)
/// blend (ϱ ~ U(0.4, 0.6)) of a high-mode and a low-mode member of the
/// original data, the modes being beyond the 1−ϖ and ϖ mode quantiles.
/// Otherwise it is a horizontal-shift outlier: Beta(U(2,5), U(6,13)) or
/// Beta(U(17,22), U(2,5)) with equal odds.
pub fn insert_outliers(
    pdfs: &[DensityFn],
    n_out: usize,
    zeta_hs: f64,
    varpi: f64,
    rng: &mut RandomStream,
) -> Result<(Vec<DensityFn>, Vec<usize>)> {
    let n = pdfs.len();
    if n_out >= n.max(1) {
        return Err(Error::TooFew { need: n_out + 1, got: n });
    }
    if !(varpi > 0.0 && varpi < 0.5) {
        return Err(param("varpi", varpi));
    }
    if !(0.0..=1.0).contains(&zeta_hs) {
        return Err(param("zeta_hs", zeta_hs));
    }
    let mut out = pdfs.to_vec();
    if n_out == 0 {
        return Ok((out, Vec::new()));
    }
    let modes: Vec<f64> = pdfs.iter().map(mode_of).collect();
    let hi = percentile(&modes, 1.0 - varpi)?;
    let lo = percentile(&modes, varpi)?;
    let upper: Vec<usize> = (0..n).filter(|&i| modes[i] >= hi).collect();
    let lower: Vec<usize> = (0..n).filter(|&i| modes[i] <= lo).collect();
    if upper.is_empty() || lower.is_empty() {
        return Err(Error::Degenerate("no curves beyond the mode quantiles".into()));
    }
    let mut free: Vec<usize> = (0..n).collect();
    let mut planted = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let z = rng.uniform(0.0, 1.0);
        let h = if z > zeta_hs {
            let h1 = &pdfs[upper[rng.index(upper.len())]];
            let h2 = &pdfs[lower[rng.index(lower.len())]];
            let rho = rng.uniform(0.4, 0.6);
            convex(rho, h1, h2)
        } else {
            let y = rng.uniform(0.0, 1.0);
            let a = rng.uniform(2.0, 5.0);
            let b = rng.uniform(6.0, 13.0);
            let c = rng.uniform(17.0, 22.0);
            let d = rng.uniform(2.0, 5.0);
            if y > 0.5 { beta_pdf(a, b)? } else { beta_pdf(c, d)? }
        };
        let k = free.swap_remove(rng.index(free.len()));
        out[k] = h;
        planted.push(k);
    }
    planted.sort_unstable();
    Ok((out, planted))
}

/// Predictor/response density samples of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairs {
    pub g: Vec<DensityFn>,
    pub f: Vec<DensityFn>,
}

impl Pairs {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Pairs {
        Pairs { g: idx.iter().map(|&i| self.g[i].clone()).collect(), f: idx.iter().map(|&i| self.f[i].clone()).collect() }
    }

    /// Responses become predictors and vice versa.
    pub fn swapped(&self) -> Pairs {
        Pairs { g: self.f.clone(), f: self.g.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PairVariant {
    /// Beta mixtures with nonlinearly linked parameters, noise N(0, 5²).
    MixtureA5,
    /// Plain betas, response parameters from the normalized predictor
    /// parameters, noise N(0, 3²).
    SimpleA9,
}

/// Draws noise until every derived beta parameter exceeds 1, so the
/// densities stay bounded on the closed grid.
fn draw_noise(rng: &mut RandomStream, sd: f64, ok: impl Fn(f64) -> bool) -> Result<f64> {
    for attempt in 0..RETRY_BUDGET {
        let e = rng.normal(0.0, sd);
        if ok(e) {
            if attempt > 0 {
                log::warn!("beta parameters out of range: noise redrawn {attempt} time(s)");
            }
            return Ok(e);
        }
    }
    Err(Error::RetriesExhausted(RETRY_BUDGET))
}

pub fn gen_pairs(n: usize, variant: PairVariant, rng: &mut RandomStream) -> Result<Pairs> {
    let mut g = Vec::with_capacity(n);
    let mut f = Vec::with_capacity(n);
    match variant {
        PairVariant::MixtureA5 => {
            for _ in 0..n {
                let a = rng.uniform(10.0, 40.0);
                let b = rng.uniform(14.0, 40.0);
                let q = rng.uniform(0.0, 0.5);
                g.push(convex(1.0 - q, &beta_pdf(a, b)?, &beta_pdf(2.0 * a, b)?));
                let params = |e: f64| {
                    let c = 2.5 * a + libm::sqrt(a) - 15.0 + e;
                    let d = 0.5 * libm::sqrt(a * b) + 45.0 - 0.8 * a + e;
                    (c, d, 0.5 * (c + d))
                };
                let e = draw_noise(rng, 5.0, |e| {
                    let (c, d, z) = params(e);
                    c > 1.0 && d > 1.0 && z > 1.0
                })?;
                let (c, d, z) = params(e);
                f.push(convex(1.0 - q, &beta_pdf(c, d)?, &beta_pdf(z, z)?));
            }
        }
        PairVariant::SimpleA9 => {
            if n < 2 {
                return Err(Error::TooFew { need: 2, got: n });
            }
            let a: Vec<f64> = (0..n).map(|_| rng.uniform(14.0, 30.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.uniform(14.0, 20.0)).collect();
            let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            for i in 0..n {
                g.push(beta_pdf(a[i], b[i])?);
                let params = |e: f64| (40.0 * (a[i] - lo) / (hi - lo) + 12.0 + e, libm::sqrt(a[i] * b[i] + a[i]) + e);
                let e = draw_noise(rng, 3.0, |e| {
                    let (c, d) = params(e);
                    c > 1.0 && d > 1.0
                })?;
                let (c, d) = params(e);
                f.push(beta_pdf(c, d)?);
            }
        }
    }
    Ok(Pairs { g, f })
}

/// Swaps `m` low-peak curves (peak ≤ 20th percentile) with `m` high-peak
/// curves (peak ≥ 80th percentile). Returns the touched positions.
pub fn element_exchange(set: &mut [DensityFn], m: usize, rng: &mut RandomStream) -> Result<Vec<usize>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let peaks: Vec<f64> = set.iter().map(|f| f.max()).collect();
    let q20 = percentile(&peaks, 0.2)?;
    let q80 = percentile(&peaks, 0.8)?;
    let low: Vec<usize> = (0..set.len()).filter(|&i| peaks[i] <= q20).collect();
    let high: Vec<usize> = (0..set.len()).filter(|&i| peaks[i] >= q80).collect();
    if low.len() < m || high.len() < m {
        return Err(Error::TooFew { need: m, got: low.len().min(high.len()) });
    }
    let l = rng.choose_distinct(&low, m);
    let u = rng.choose_distinct(&high, m);
    for (&i, &j) in l.iter().zip(&u) {
        set.swap(i, j);
    }
    let mut ide = l;
    ide.extend(u);
    Ok(ide)
}

fn disjoint_sorted(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    if a.iter().any(|i| b.contains(i)) {
        return None;
    }
    let mut all = [a, b].concat();
    all.sort_unstable();
    Some(all)
}

/// Breaks `m_g + m_f` pairs of associations by exchanging predictors among
/// themselves and responses among themselves, redrawing until no pair is
/// touched on both sides.
pub fn exchange_contaminate(pairs: &Pairs, m_g: usize, m_f: usize, rng: &mut RandomStream) -> Result<(Pairs, Vec<usize>)> {
    for _ in 0..RETRY_BUDGET {
        let mut out = pairs.clone();
        let ide_g = element_exchange(&mut out.g, m_g, rng)?;
        let ide_f = element_exchange(&mut out.f, m_f, rng)?;
        if let Some(all) = disjoint_sorted(&ide_g, &ide_f) {
            return Ok((out, all));
        }
    }
    Err(Error::RetriesExhausted(RETRY_BUDGET))
}

/// Plants `n_g` outliers among the predictors and `n_f` among the responses,
/// redrawing until the two position sets are disjoint.
pub fn insert_contaminate(
    pairs: &Pairs,
    n_g: usize,
    n_f: usize,
    zeta_hs: f64,
    varpi: f64,
    rng: &mut RandomStream,
) -> Result<(Pairs, Vec<usize>)> {
    for _ in 0..RETRY_BUDGET {
        let (g, ide_g) = insert_outliers(&pairs.g, n_g, zeta_hs, varpi, rng)?;
        let (f, ide_f) = insert_outliers(&pairs.f, n_f, zeta_hs, varpi, rng)?;
        if let Some(all) = disjoint_sorted(&ide_g, &ide_f) {
            return Ok((Pairs { g, f }, all));
        }
    }
    Err(Error::RetriesExhausted(RETRY_BUDGET))
}

/// Sinusoid curves `a sin 2πx + b cos 2πx` with `n_out` planted functional
/// outliers (warped phase, low amplitude, and one high-frequency ripple on
/// the most central curve), shifted by the global minimum and normalized.
pub fn gen_sinusoid_dataset(n: usize, n_out: usize, rng: &mut RandomStream) -> Result<(Vec<DensityFn>, Vec<usize>)> {
    if n_out >= n {
        return Err(Error::TooFew { need: n_out + 1, got: n });
    }
    let wave = |a: f64, b: f64, phase: &dyn Fn(f64) -> f64| {
        GridCurve::unit(|x| {
            let t = 2.0 * core::f64::consts::PI * phase(x);
            a * libm::sin(t) + b * libm::cos(t)
        })
    };
    let mut v: Vec<GridCurve> = (0..n)
        .map(|_| {
            let a = rng.uniform(0.012, 0.05);
            let b = rng.uniform(0.012, 0.075);
            wave(a, b, &|x| x)
        })
        .collect();
    let mut outliers = Vec::with_capacity(n_out);
    for _ in 0..n_out.saturating_sub(1) {
        let z = rng.uniform(0.0, 1.0);
        if z < 0.6 {
            let c = rng.uniform(-4.5, -2.0);
            let a = rng.uniform(0.02, 0.05);
            let b = rng.uniform(0.0, 0.075);
            outliers.push(wave(a, b, &|x| c * (x - 4.0) + x * x * x));
        } else {
            let a = rng.uniform(0.0, 0.008);
            let b = rng.uniform(0.0, 0.008);
            outliers.push(wave(a, b, &|x| x));
        }
    }
    if n_out > 0 {
        let center = pointwise_median(&v)?;
        let mut best = (0, f64::INFINITY);
        for (i, c) in v.iter().enumerate() {
            let d = l2_distance(c, &center)?;
            if d < best.1 {
                best = (i, d);
            }
        }
        let vm = &v[best.0];
        outliers.push(
            vm.with_values(
                vm.abscissas()
                    .zip(vm.values())
                    .map(|(x, y)| y + 0.02 * libm::sin(20.0 * core::f64::consts::PI * x))
                    .collect(),
            ),
        );
    }
    let all: Vec<usize> = (0..n).collect();
    let mut planted = rng.choose_distinct(&all, n_out);
    for (&k, o) in planted.iter().zip(outliers) {
        v[k] = o;
    }
    planted.sort_unstable();
    let floor = v.iter().map(GridCurve::min).fold(f64::INFINITY, f64::min);
    let pdfs = v.iter().map(|c| DensityFn::normalized(c.map(|y| y - floor))).collect::<Result<Vec<_>>>()?;
    Ok((pdfs, planted))
}
