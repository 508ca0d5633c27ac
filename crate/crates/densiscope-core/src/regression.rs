//! Kernel LQD regression between densities.
//!
//! Predictor and response densities are mapped to LQD curves. The responses
//! are reduced to `m` FPCA scores `Y` (n × m); the predictors enter only
//! through the Gaussian Gram matrix `A`. The coefficients `B` (n × m)
//! minimize
//!
//! ```text
//! J(B) = ‖W (Y − A B K)‖²_F + λ trace(A B K Bᵀ),   W = diag(√w)
//! ```
//!
//! and a new predictor `g₀` maps to the scores `Σ_j a₀ⱼ βⱼ K`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::density::{l1_distance, l2_distance, trapezoid_weights, DensityFn, GridCurve};
use crate::error::{param, Error, Result};
use crate::scalar::{mad, median};
use crate::transforms::{clr_batch, inverse_lqd, lqd, pointwise_median, LqdCurve};

/// Relative singular-value cutoff of the pseudoinverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Truncated Karhunen–Loève basis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FpcaBasis {
    pub mean: GridCurve,
    pub functions: Vec<GridCurve>,
    pub eigenvalues: Vec<f64>,
}

impl FpcaBasis {
    pub fn order(&self) -> usize {
        self.functions.len()
    }

    /// `μ + Σ ξ_k φ_k`.
    pub fn reconstruct(&self, scores: &[f64]) -> GridCurve {
        let mut v = self.mean.values().to_vec();
        for (phi, &s) in self.functions.iter().zip(scores) {
            for (x, p) in v.iter_mut().zip(phi.values()) {
                *x += s * p;
            }
        }
        self.mean.with_values(v)
    }

    /// ⟨x − μ, φ_k⟩ for every k.
    pub fn project(&self, x: &GridCurve) -> Vec<f64> {
        let w = trapezoid_weights(x.len(), x.step());
        self.functions
            .iter()
            .map(|phi| {
                (0..x.len()).map(|j| w[j] * (x.values()[j] - self.mean.values()[j]) * phi.values()[j]).sum()
            })
            .collect()
    }
}

fn check_common(curves: &[GridCurve]) -> Result<&GridCurve> {
    let first = curves.first().ok_or(Error::TooFew { need: 1, got: 0 })?;
    if curves.iter().any(|c| !c.same_grid(first)) {
        return Err(Error::DomainMismatch);
    }
    Ok(first)
}

/// FPCA with trapezoid quadrature, so the eigenfunctions are orthonormal in
/// the discrete L2 inner product. Solved through the n × n Gram matrix of the
/// centered curves. Returns the basis and the n × m score matrix.
pub fn fpca(curves: &[GridCurve], m: usize) -> Result<(FpcaBasis, DMatrix<f64>)> {
    let n = curves.len();
    if m == 0 {
        return Err(param("m", 0.0));
    }
    if m >= n {
        return Err(Error::TooFew { need: m + 1, got: n });
    }
    let first = check_common(curves)?;
    let len = first.len();
    let w = trapezoid_weights(len, first.step());
    let mut mean = vec![0.0; len];
    for c in curves {
        for (acc, v) in mean.iter_mut().zip(c.values()) {
            *acc += v / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, len, |i, j| curves[i].values()[j] - mean[j]);
    let xw = DMatrix::from_fn(n, len, |i, j| x[(i, j)] * w[j]);
    let gram = (&xw * x.transpose()) / n as f64;
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = 1e-12 * top.max(f64::MIN_POSITIVE);

    let inner = |a: &[f64], b: &[f64]| -> f64 { (0..len).map(|j| w[j] * a[j] * b[j]).sum() };
    let mut functions: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut eigenvalues = Vec::with_capacity(m);
    for &k in order.iter().take(m) {
        let lambda = eig.eigenvalues[k];
        if lambda > floor {
            let v = eig.eigenvectors.column(k);
            let scale = libm::sqrt(n as f64 * lambda);
            let phi: Vec<f64> = (0..len).map(|j| (0..n).map(|i| x[(i, j)] * v[i]).sum::<f64>() / scale).collect();
            functions.push(phi);
            eigenvalues.push(lambda);
        } else {
            eigenvalues.push(lambda.max(0.0));
            functions.push(Vec::new());
        }
    }
    // Null directions: complete the basis with orthonormalized cosines.
    let mut freq = 0usize;
    for k in 0..m {
        if !functions[k].is_empty() {
            continue;
        }
        loop {
            let mut cand: Vec<f64> = (0..len)
                .map(|j| libm::cos(core::f64::consts::PI * freq as f64 * (j as f64) / (len - 1) as f64))
                .collect();
            freq += 1;
            for other in functions.iter().filter(|f| !f.is_empty()) {
                let c = inner(&cand, other);
                for (a, b) in cand.iter_mut().zip(other) {
                    *a -= c * b;
                }
            }
            let norm = libm::sqrt(inner(&cand, &cand));
            if norm > 1e-6 {
                functions[k] = cand.into_iter().map(|v| v / norm).collect();
                break;
            }
        }
    }
    let functions: Vec<GridCurve> = functions.into_iter().map(|v| first.with_values(v)).collect();
    let scores = DMatrix::from_fn(n, m, |i, k| {
        (0..len).map(|j| w[j] * x[(i, j)] * functions[k].values()[j]).sum::<f64>()
    });
    let mean = first.with_values(mean);
    Ok((FpcaBasis { mean, functions, eigenvalues }, scores))
}

/// Mean L2 distance over all ordered pairs, diagonal included.
pub fn sigma_heuristic(psis: &[GridCurve]) -> Result<f64> {
    let n = psis.len();
    if n < 2 {
        return Err(Error::TooFew { need: 2, got: n });
    }
    check_common(psis)?;
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += 2.0 * l2_distance(&psis[i], &psis[j])?;
        }
    }
    let sigma = total / (n * n) as f64;
    if sigma < 1e-12 {
        return Err(Error::Degenerate("all predictor curves coincide".into()));
    }
    Ok(sigma)
}

/// `a_ij = exp(−‖ψ_i − ψ_j‖² / (2σ²))`.
pub fn gaussian_gram(psis: &[GridCurve], sigma: f64) -> Result<DMatrix<f64>> {
    let n = psis.len();
    let mut a = DMatrix::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = l2_distance(&psis[i], &psis[j])?;
            let v = libm::exp(-d * d / (2.0 * sigma * sigma));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

fn kernel_row(psis: &[GridCurve], x: &GridCurve, sigma: f64) -> Result<Vec<f64>> {
    psis.iter()
        .map(|p| {
            let d = l2_distance(p, x)?;
            Ok(libm::exp(-d * d / (2.0 * sigma * sigma)))
        })
        .collect()
}

fn pinv_solve(m: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = PINV_CUTOFF * top.max(f64::MIN_POSITIVE);
    svd.solve(rhs, eps).map_err(|e| Error::Degenerate(alloc::string::String::from(e)))
}

fn check_system(a: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], k: Option<&DMatrix<f64>>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n || y.nrows() != n || w.len() != n {
        return Err(Error::Dimension(alloc::format!("A {}x{}, Y {}x{}, w {}", n, a.ncols(), y.nrows(), y.ncols(), w.len())));
    }
    if let Some(k) = k {
        if k.nrows() != y.ncols() || k.ncols() != y.ncols() {
            return Err(Error::Dimension(alloc::format!("K is {}x{}, Y has {} columns", k.nrows(), k.ncols(), y.ncols())));
        }
    }
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Dimension("weights must be nonnegative".into()));
    }
    Ok(())
}

/// Identity-K solve: one pseudoinverse of `A W² A + λA` applied to `A W² Y`.
pub fn solve_fast(a: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], lambda: f64) -> Result<DMatrix<f64>> {
    check_system(a, y, w, None)?;
    let w2 = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let aw2 = a * &w2;
    let lhs = &aw2 * a + a * lambda;
    pinv_solve(lhs, &(&aw2 * y))
}

/// Kronecker form `vec B = [(K⊗AW)(K⊗WA) + λ (K⊗A)]⁺ (K⊗AW) vec(WY)`.
pub fn solve_general(a: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], lambda: f64, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_system(a, y, w, Some(k))?;
    let (n, m) = (a.nrows(), y.ncols());
    let wd = DMatrix::from_diagonal(&DVector::from_iterator(n, w.iter().map(|v| libm::sqrt(*v))));
    let c1 = k.kronecker(&(a * &wd));
    let c2 = k.kronecker(&(&wd * a));
    let lhs = &c1 * &c2 + k.kronecker(a) * lambda;
    let wy = &wd * y;
    let rhs = &c1 * DMatrix::from_column_slice(n * m, 1, wy.as_slice());
    let vec_b = pinv_solve(lhs, &rhs)?;
    Ok(DMatrix::from_column_slice(n, m, vec_b.as_slice()))
}

/// Coefficients for `K` (identity when `None`).
pub fn solve_coefficients(
    a: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &[f64],
    lambda: f64,
    k: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) {
        return Err(param("lambda", lambda));
    }
    match k {
        Some(k) if *k != DMatrix::identity(k.nrows(), k.ncols()) => solve_general(a, y, w, lambda, k),
        _ => solve_fast(a, y, w, lambda),
    }
}

/// `‖W(Y − ABK)‖²_F + λ trace(A B K Bᵀ)`.
pub fn objective(a: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], lambda: f64, k: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let fit = a * b * k;
    let mut loss = 0.0;
    for i in 0..y.nrows() {
        for j in 0..y.ncols() {
            let r = y[(i, j)] - fit[(i, j)];
            loss += w[i] * r * r;
        }
    }
    loss + lambda * (a * b * k * b.transpose()).trace()
}

/// Relative residual of `A W² A B K² + λ A B K = A W² Y K`.
pub fn normal_equation_residual(
    a: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &[f64],
    lambda: f64,
    k: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> f64 {
    let w2 = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let aw2 = a * &w2;
    let lhs = &aw2 * a * b * k * k + a * b * k * lambda;
    let rhs = &aw2 * y * k;
    (&lhs - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE)
}

/// Log-spaced grid of `count` values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    (0..count).map(|i| libm::pow(10.0, a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

/// 30 values from 1e-4 to 1e1.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-4, 1e1, 30)
}

/// GCV statistics for every λ in `grid`, from one eigendecomposition each of
/// `A` and `K`: the hat matrix (K⊗A)[(K⊗A) + λI]⁻¹ shares their eigenvectors.
pub fn gcv_scores(a: &DMatrix<f64>, y: &DMatrix<f64>, k: Option<&DMatrix<f64>>, grid: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (a.nrows(), y.ncols());
    check_system(a, y, &vec![1.0; n], k)?;
    let ea = SymmetricEigen::new(a.clone());
    let (mu, p) = match k {
        Some(k) => {
            let e = SymmetricEigen::new(k.clone());
            (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors)
        }
        None => (vec![1.0; m], DMatrix::identity(m, m)),
    };
    let z = ea.eigenvectors.transpose() * y * &p;
    Ok(grid
        .iter()
        .map(|&lambda| {
            let mut resid = 0.0;
            let mut trace = 0.0;
            for j in 0..n {
                for l in 0..m {
                    let s = (mu[l] * ea.eigenvalues[j]).max(0.0);
                    let shrink = lambda / (s + lambda);
                    resid += shrink * shrink * z[(j, l)] * z[(j, l)];
                    trace += shrink;
                }
            }
            let nn = n as f64;
            (resid / nn) / ((trace / nn) * (trace / nn))
        })
        .collect())
}

/// Grid minimizer of the GCV statistic; near-ties go to the smallest λ.
pub fn gcv_select_matrix(a: &DMatrix<f64>, y: &DMatrix<f64>, k: Option<&DMatrix<f64>>, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::TooFew { need: 1, got: 0 });
    }
    if grid.iter().any(|l| !(*l > 0.0)) {
        return Err(param("lambda", grid.iter().copied().fold(f64::INFINITY, f64::min)));
    }
    let scores = gcv_scores(a, y, k, grid)?;
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.abs().max(f64::MIN_POSITIVE);
    let mut pick: Option<f64> = None;
    for (&l, &s) in grid.iter().zip(&scores) {
        if s <= best + tol {
            pick = Some(pick.map_or(l, |p: f64| p.min(l)));
        }
    }
    Ok(pick.unwrap_or(grid[0]))
}

/// Parameters of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    pub lambda: f64,
    /// Uniform mixing of the LQD transform.
    pub alpha: f64,
    /// FPCA order.
    pub m: usize,
    /// Output Gram matrix; identity when `None`.
    pub k: Option<DMatrix<f64>>,
}

impl FitParams {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, alpha: 0.3, m: 5, k: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub train_psi: Vec<GridCurve>,
    pub coef: DMatrix<f64>,
    pub gram_k: DMatrix<f64>,
    pub kernel: DMatrix<f64>,
    pub sigma: f64,
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub basis: FpcaBasis,
    /// Training scores `Y`.
    pub scores: DMatrix<f64>,
}

/// LQD curves of every density.
pub fn lqd_all(pdfs: &[DensityFn], alpha: f64) -> Result<Vec<GridCurve>> {
    pdfs.iter().map(|f| lqd(f, alpha).map(|l| l.curve)).collect()
}

fn check_pairs(g: &[DensityFn], f: &[DensityFn]) -> Result<()> {
    if g.len() != f.len() {
        return Err(Error::Dimension(alloc::format!("{} predictors, {} responses", g.len(), f.len())));
    }
    if g.len() < 2 {
        return Err(Error::TooFew { need: 2, got: g.len() });
    }
    Ok(())
}

/// Fits the weighted estimator; `weights` are the `w_i` (W = diag(√w)).
pub fn fit(g: &[DensityFn], f: &[DensityFn], weights: &[f64], params: &FitParams) -> Result<RegressionModel> {
    check_pairs(g, f)?;
    fit_lqd(lqd_all(g, params.alpha)?, &lqd_all(f, params.alpha)?, weights, params)
}

/// [`fit`] on precomputed LQD curves.
pub fn fit_lqd(psi_g: Vec<GridCurve>, psi_f: &[GridCurve], weights: &[f64], params: &FitParams) -> Result<RegressionModel> {
    if psi_g.len() != psi_f.len() || weights.len() != psi_g.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} predictors, {} responses, {} weights",
            psi_g.len(),
            psi_f.len(),
            weights.len()
        )));
    }
    let (basis, y) = fpca(psi_f, params.m)?;
    let sigma = sigma_heuristic(&psi_g)?;
    let a = gaussian_gram(&psi_g, sigma)?;
    let coef = solve_coefficients(&a, &y, weights, params.lambda, params.k.as_ref())?;
    let gram_k = params.k.clone().unwrap_or_else(|| DMatrix::identity(params.m, params.m));
    Ok(RegressionModel {
        train_psi: psi_g,
        coef,
        gram_k,
        kernel: a,
        sigma,
        lambda: params.lambda,
        weights: weights.to_vec(),
        alpha: params.alpha,
        basis,
        scores: y,
    })
}

impl RegressionModel {
    /// Score vector predicted for a predictor LQD curve.
    pub fn predict_scores(&self, psi0: &GridCurve) -> Result<Vec<f64>> {
        let row = kernel_row(&self.train_psi, psi0, self.sigma)?;
        let r = DMatrix::from_row_slice(1, row.len(), &row);
        let s = r * &self.coef * &self.gram_k;
        Ok(s.iter().copied().collect())
    }

    /// Response LQD curve predicted for a predictor LQD curve.
    pub fn predict_lqd(&self, psi0: &GridCurve) -> Result<GridCurve> {
        Ok(self.basis.reconstruct(&self.predict_scores(psi0)?))
    }

    /// Predicted response density.
    pub fn predict(&self, g0: &DensityFn) -> Result<DensityFn> {
        self.predict_from_lqd(&lqd(g0, self.alpha)?.curve)
    }

    pub fn predict_from_lqd(&self, psi0: &GridCurve) -> Result<DensityFn> {
        let curve = self.predict_lqd(psi0)?;
        inverse_lqd(&LqdCurve { curve, alpha: self.alpha }, self.alpha)
    }

    /// Fitted training scores `A B K`.
    pub fn fitted_scores(&self) -> DMatrix<f64> {
        &self.kernel * &self.coef * &self.gram_k
    }
}

/// GCV choice of λ for the unweighted problem built from `g`, `f`.
pub fn gcv_select(g: &[DensityFn], f: &[DensityFn], alpha: f64, m: usize, grid: &[f64]) -> Result<f64> {
    check_pairs(g, f)?;
    gcv_select_lqd(&lqd_all(g, alpha)?, &lqd_all(f, alpha)?, m, grid)
}

/// [`gcv_select`] on precomputed LQD curves.
pub fn gcv_select_lqd(psi_g: &[GridCurve], psi_f: &[GridCurve], m: usize, grid: &[f64]) -> Result<f64> {
    let (_, y) = fpca(psi_f, m)?;
    let a = gaussian_gram(psi_g, sigma_heuristic(psi_g)?)?;
    gcv_select_matrix(&a, &y, None, grid)
}

/// Per-pair weights with their two factors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub w_single: Vec<f64>,
    pub w_assoc: Vec<f64>,
    pub rho1: f64,
    pub rho2: f64,
}

impl WeightVector {
    pub fn ones(n: usize) -> Self {
        Self { w: vec![1.0; n], w_single: vec![1.0; n], w_assoc: vec![1.0; n], rho1: 0.0, rho2: 0.0 }
    }
}

/// Outlyingness statistics of one sample used by the single-dataset factor:
/// LQD L1 distance and clr L2 distance of each curve to the pointwise median.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveStats {
    pub lqd_dist: Vec<f64>,
    pub clr_dist: Vec<f64>,
}

impl CurveStats {
    /// LQD with α = 1e-10 and clr after the default α = 0.1 mixing rule.
    pub fn compute(pdfs: &[DensityFn]) -> Result<Self> {
        let lq = lqd_all(pdfs, 1e-10)?;
        let center = pointwise_median(&lq)?;
        let lqd_dist = lq.iter().map(|c| l1_distance(c, &center)).collect::<Result<Vec<_>>>()?;
        let curves: Vec<GridCurve> = pdfs.iter().map(|f| f.curve().clone()).collect();
        let cl = clr_batch(&curves, 0.1)?;
        let center = pointwise_median(&cl)?;
        let clr_dist = cl.iter().map(|c| l2_distance(c, &center)).collect::<Result<Vec<_>>>()?;
        Ok(Self { lqd_dist, clr_dist })
    }
}

/// Residuals of one pair: clr (Bayes) distance and LQD L1 distance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualPair {
    pub bayes: f64,
    pub lqd: f64,
}

/// Decay factors `(1 + |x_i − med| / MAD)^(−ρ)`; a zero MAD disables the
/// factor with a warning.
fn decay(xs: &[f64], rho: f64) -> Result<Vec<f64>> {
    let m = median(xs)?;
    let s = mad(xs)?;
    if s <= 0.0 {
        log::warn!("zero MAD in weight statistic: factor set to 1");
        return Ok(vec![1.0; xs.len()]);
    }
    Ok(xs.iter().map(|x| libm::pow(1.0 + (x - m).abs() / s, -rho)).collect())
}

fn min_max(xs: &[f64]) -> Vec<f64> {
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi > lo {
        xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; xs.len()]
    }
}

/// Inputs of [`design_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightInputs<'a> {
    pub flags_g: &'a [usize],
    pub flags_f: &'a [usize],
    pub stats_g: &'a CurveStats,
    pub stats_f: &'a CurveStats,
    pub flags_assoc: &'a [usize],
    /// Reverse-model (f → g) residuals, used for the predictor side.
    pub resid_g: &'a [ResidualPair],
    /// Forward-model (g → f) residuals, used for the response side.
    pub resid_f: &'a [ResidualPair],
}

/// Final weights `w_i = w_I · w_II`.
///
/// `w_I` multiplies, for each flagged curve, the decay of its LQD and clr
/// outlyingness (exponent ρ₁), over both samples. `w_II` applies, for each
/// flagged pair, the decay (exponent ρ₂) of the average of the min-max
/// normalized Bayes and LQD residuals, again over both sides. Unflagged
/// curves and pairs contribute a factor of exactly 1.
pub fn design_weights(n: usize, inp: &WeightInputs<'_>, rho1: f64, rho2: f64) -> Result<WeightVector> {
    if !(rho1 >= 0.0) {
        return Err(param("rho1", rho1));
    }
    if !(rho2 >= 0.0) {
        return Err(param("rho2", rho2));
    }
    let mut w_single = vec![1.0; n];
    for (flags, stats) in [(inp.flags_g, inp.stats_g), (inp.flags_f, inp.stats_f)] {
        if flags.is_empty() {
            continue;
        }
        if stats.lqd_dist.len() != n || stats.clr_dist.len() != n {
            return Err(Error::Dimension("curve statistics do not match n".into()));
        }
        let d1 = decay(&stats.lqd_dist, rho1)?;
        let d2 = decay(&stats.clr_dist, rho1)?;
        for &i in flags {
            w_single[i] *= d1[i] * d2[i];
        }
    }
    let mut w_assoc = vec![1.0; n];
    if !inp.flags_assoc.is_empty() {
        for resid in [inp.resid_g, inp.resid_f] {
            if resid.len() != n {
                return Err(Error::Dimension("residuals do not match n".into()));
            }
            let b = min_max(&resid.iter().map(|r| r.bayes).collect::<Vec<_>>());
            let l = min_max(&resid.iter().map(|r| r.lqd).collect::<Vec<_>>());
            let avg: Vec<f64> = b.iter().zip(&l).map(|(x, y)| 0.5 * (x + y)).collect();
            let d = decay(&avg, rho2)?;
            for &i in inp.flags_assoc {
                w_assoc[i] *= d[i];
            }
        }
    }
    let w = w_single.iter().zip(&w_assoc).map(|(a, b)| a * b).collect();
    Ok(WeightVector { w, w_single, w_assoc, rho1, rho2 })
}
