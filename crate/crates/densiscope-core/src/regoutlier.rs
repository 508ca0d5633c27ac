//! Regression-outlier detection for density pairs: forward (g → f) and
//! reverse (f → g) kernel LQD models, residual boxplots and stepwise deletion
//! of flagged pairs from the training set.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::density::{l1_distance, l2_distance, median_of, DensityFn, GridCurve};
use crate::error::{param, Error, Result};
use crate::functional::{default_tree, tree_detect, NodeConfig};
use crate::regression::{
    design_weights, fit_lqd, gcv_select_lqd, lqd_all, log_grid, CurveStats, FitParams, WeightInputs, WeightVector,
};
use crate::scalar::{boxplot_detect, BoxplotParams};
use crate::transforms::{clr, lqd, MIN_SUPPORT};

pub use crate::regression::ResidualPair;

/// Bayes-distance residual with median alignment.
///
/// When the medians differ by at most `theta_h`, `f` is translated onto
/// `f_hat`, both are cut to the overlap of their domains and the distance is
/// taken there. Otherwise both are compared on the full domain. Either way
/// both curves are mixed with `alpha_mix` of the uniform before the clr.
pub fn residual_bayes(f_hat: &DensityFn, f: &DensityFn, theta_h: f64, alpha_mix: f64) -> Result<f64> {
    if !(theta_h >= 0.0) {
        return Err(param("theta_h", theta_h));
    }
    if !(0.0..1.0).contains(&alpha_mix) {
        return Err(param("alpha_mix", alpha_mix));
    }
    let (start, end) = (f.start(), f.end());
    if f_hat.start() != start || f_hat.end() != end {
        return Err(Error::DomainMismatch);
    }
    let mix = |v: f64| (1.0 - alpha_mix) * v.max(0.0) + alpha_mix;
    let shift = median_of(f_hat) - median_of(f);
    if shift.abs() <= theta_h {
        let (c1, c2) = ((start + shift).max(start), (end + shift).min(end));
        if c2 - c1 >= MIN_SUPPORT {
            let n = f.len();
            let a = GridCurve::from_fn(c1, c2, n, |x| mix(f.eval(x - shift).unwrap_or(0.0)))?;
            let b = GridCurve::from_fn(c1, c2, n, |x| mix(f_hat.eval(x).unwrap_or(0.0)))?;
            return l2_distance(&clr(&a, 0.0)?, &clr(&b, 0.0)?);
        }
        log::warn!("median alignment leaves a common support of width {}: using the unaligned residual", c2 - c1);
    }
    let a = f.curve().map(mix);
    let b = f_hat.curve().map(mix);
    l2_distance(&clr(&a, 0.0)?, &clr(&b, 0.0)?)
}

/// L1 distance between the LQD curves of `f_hat` and `f`.
pub fn residual_lqd(f_hat: &DensityFn, f: &DensityFn, alpha_mix: f64) -> Result<f64> {
    l1_distance(&lqd(f_hat, alpha_mix)?.curve, &lqd(f, alpha_mix)?.curve)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RegDetectParams {
    pub alpha_lqd: f64,
    pub alpha_bayes: f64,
    pub whisker_lqd: f64,
    pub whisker_bayes: f64,
    /// Floor on the GCV choice of λ.
    pub theta_lambda: f64,
    /// Largest median gap that is aligned away.
    pub theta_h: f64,
    pub m: usize,
    pub iterations: usize,
    pub lambda_grid: Vec<f64>,
    /// Drop pairs with a single-sample outlier (default tree on either
    /// side) from the initial training set.
    pub prefilter: bool,
}

impl Default for RegDetectParams {
    fn default() -> Self {
        Self {
            alpha_lqd: 0.3,
            alpha_bayes: 0.1,
            whisker_lqd: 1.5,
            whisker_bayes: 1.5,
            theta_lambda: 0.01,
            theta_h: 0.15,
            m: 5,
            iterations: 4,
            lambda_grid: log_grid(1e-4, 1e1, 30),
            prefilter: false,
        }
    }
}

impl RegDetectParams {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(param("iterations", 0.0));
        }
        if !(self.theta_lambda >= 0.0) {
            return Err(param("theta_lambda", self.theta_lambda));
        }
        if !(self.theta_h >= 0.0) {
            return Err(param("theta_h", self.theta_h));
        }
        for (name, w) in [("whisker_lqd", self.whisker_lqd), ("whisker_bayes", self.whisker_bayes)] {
            if !(w > 0.0) {
                return Err(param(name, w));
            }
        }
        Ok(())
    }

    /// Smallest training set a fit is attempted on.
    pub fn min_training(&self) -> usize {
        (self.m + 2).max(8)
    }
}

/// Outcome of one directional detector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionalFlags {
    pub flagged: Vec<usize>,
    pub residuals: Vec<ResidualPair>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegDetectReport {
    pub n: usize,
    pub lambda_forward: f64,
    pub lambda_reverse: f64,
    /// Pairs removed before the first fit by the optional filtration.
    pub prefiltered: Vec<usize>,
    /// Union of forward and reverse flags per completed iteration.
    pub iterations: Vec<Vec<usize>>,
    /// Training sets used per iteration.
    pub training: Vec<Vec<usize>>,
    pub flagged: Vec<usize>,
    /// Residuals of the last completed iteration.
    pub forward: Option<DirectionalFlags>,
    pub reverse: Option<DirectionalFlags>,
    pub stopped_early: bool,
}

/// LQD curves of one side, at the fitting α, cached across iterations.
struct Side<'a> {
    pdfs: &'a [DensityFn],
    psi: Vec<GridCurve>,
}

/// Fits predictors → responses on `train`, predicts every response and
/// flags residual outliers. The reverse detector is this with the sides
/// swapped.
fn directional(
    pred: &Side<'_>,
    resp: &Side<'_>,
    train: &[usize],
    lambda: f64,
    params: &RegDetectParams,
) -> Result<DirectionalFlags> {
    let psi_g: Vec<GridCurve> = train.iter().map(|&i| pred.psi[i].clone()).collect();
    let psi_f: Vec<GridCurve> = train.iter().map(|&i| resp.psi[i].clone()).collect();
    let fp = FitParams { lambda, alpha: params.alpha_lqd, m: params.m, k: None };
    let model = fit_lqd(psi_g, &psi_f, &vec![1.0; train.len()], &fp)?;
    let residuals = (0..resp.pdfs.len())
        .map(|i| {
            let f_hat = model.predict_from_lqd(&pred.psi[i])?;
            let bayes = residual_bayes(&f_hat, &resp.pdfs[i], params.theta_h, params.alpha_bayes)?;
            let lqd = l1_distance(&lqd(&f_hat, params.alpha_lqd)?.curve, &resp.psi[i])?;
            Ok(ResidualPair { bayes, lqd })
        })
        .collect::<Result<Vec<_>>>()?;
    let eb: Vec<f64> = residuals.iter().map(|r| r.bayes).collect();
    let el: Vec<f64> = residuals.iter().map(|r| r.lqd).collect();
    let mut flagged: BTreeSet<usize> = boxplot_detect(&eb, BoxplotParams::one_sided(params.whisker_bayes)).into_iter().collect();
    flagged.extend(boxplot_detect(&el, BoxplotParams::one_sided(params.whisker_lqd)));
    Ok(DirectionalFlags { flagged: flagged.into_iter().collect(), residuals })
}

/// Stepwise-deletion regression-outlier detector over `(g_i, f_i)` pairs.
pub fn detect_regression_outliers(g: &[DensityFn], f: &[DensityFn], params: &RegDetectParams) -> Result<RegDetectReport> {
    params.validate()?;
    let n = g.len();
    if f.len() != n {
        return Err(Error::Dimension(alloc::format!("{} predictors, {} responses", n, f.len())));
    }
    if n < 8 {
        return Err(Error::TooFew { need: 8, got: n });
    }
    let sg = Side { pdfs: g, psi: lqd_all(g, params.alpha_lqd)? };
    let sf = Side { pdfs: f, psi: lqd_all(f, params.alpha_lqd)? };

    let mut prefiltered = Vec::new();
    if params.prefilter {
        let tree = default_tree();
        let mut set: BTreeSet<usize> = tree_detect(g, &tree)?.flagged().into_iter().collect();
        set.extend(tree_detect(f, &tree)?.flagged());
        prefiltered = set.into_iter().collect();
    }
    let mut train: Vec<usize> = (0..n).filter(|i| prefiltered.binary_search(i).is_err()).collect();
    if train.len() < params.min_training() {
        return Err(Error::TooFew { need: params.min_training(), got: train.len() });
    }

    let pick = |a: &Side<'_>, b: &Side<'_>| -> Result<f64> {
        let pa: Vec<GridCurve> = train.iter().map(|&i| a.psi[i].clone()).collect();
        let pb: Vec<GridCurve> = train.iter().map(|&i| b.psi[i].clone()).collect();
        Ok(gcv_select_lqd(&pa, &pb, params.m, &params.lambda_grid)?.max(params.theta_lambda))
    };
    let lambda_forward = pick(&sg, &sf)?;
    let lambda_reverse = pick(&sf, &sg)?;

    let mut report = RegDetectReport {
        n,
        lambda_forward,
        lambda_reverse,
        prefiltered,
        iterations: Vec::new(),
        training: Vec::new(),
        flagged: Vec::new(),
        forward: None,
        reverse: None,
        stopped_early: false,
    };
    for _ in 0..params.iterations {
        if train.len() < params.min_training() {
            log::warn!("training set down to {} pairs: stopping after {} iterations", train.len(), report.iterations.len());
            report.stopped_early = true;
            break;
        }
        let fwd = directional(&sg, &sf, &train, lambda_forward, params)?;
        let rev = directional(&sf, &sg, &train, lambda_reverse, params)?;
        let union: BTreeSet<usize> = fwd.flagged.iter().chain(&rev.flagged).copied().collect();
        report.training.push(train.clone());
        train.retain(|i| !union.contains(i));
        report.flagged = union.into_iter().collect();
        report.iterations.push(report.flagged.clone());
        report.forward = Some(fwd);
        report.reverse = Some(rev);
    }
    Ok(report)
}

/// Weights for the robust fit: single-sample flags from `tree` on each side,
/// association flags and residuals from [`detect_regression_outliers`].
pub fn robust_weights(
    g: &[DensityFn],
    f: &[DensityFn],
    tree: &[NodeConfig],
    params: &RegDetectParams,
    rho1: f64,
    rho2: f64,
) -> Result<(WeightVector, RegDetectReport)> {
    let flags_g = tree_detect(g, tree)?.flagged();
    let flags_f = tree_detect(f, tree)?.flagged();
    let rep = detect_regression_outliers(g, f, params)?;
    let (Some(fwd), Some(rev)) = (&rep.forward, &rep.reverse) else {
        return Err(Error::Degenerate("no completed detector iteration".into()));
    };
    let stats_g = CurveStats::compute(g)?;
    let stats_f = CurveStats::compute(f)?;
    let inputs = WeightInputs {
        flags_g: &flags_g,
        flags_f: &flags_f,
        stats_g: &stats_g,
        stats_f: &stats_f,
        flags_assoc: &rep.flagged,
        resid_g: &rev.residuals,
        resid_f: &fwd.residuals,
    };
    let w = design_weights(g.len(), &inputs, rho1, rho2)?;
    Ok((w, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::beta_pdf;

    fn shifted(a: f64, b: f64, by: f64) -> DensityFn {
        let base = beta_pdf(a, b).unwrap();
        DensityFn::normalized(base.map(|_| 0.0).with_values(
            base.abscissas().map(|x| if x - by >= 0.0 { base.eval(x - by).unwrap() } else { 0.0 }).collect(),
        ))
        .unwrap()
    }

    #[test]
    fn bayes_residual_identity_and_alignment() {
        let f = beta_pdf(4.0, 8.0).unwrap();
        assert!(residual_bayes(&f, &f, 0.15, 0.1).unwrap() < 1e-12);
        let g = shifted(4.0, 8.0, 0.1);
        let aligned = residual_bayes(&f, &g, 0.2, 0.1).unwrap();
        let raw = residual_bayes(&f, &g, 0.0, 0.1).unwrap();
        assert!(aligned <= 1e-3, "aligned {aligned}");
        assert!(raw > 100.0 * aligned.max(1e-6), "raw {raw}");
    }

    #[test]
    fn lqd_residual_blindness_and_mixing() {
        let f = beta_pdf(6.0, 9.0).unwrap();
        assert!(residual_lqd(&f, &f, 0.3).unwrap() < 1e-12);
        let g = shifted(6.0, 9.0, 0.1);
        let blind = residual_lqd(&f, &g, 1e-6).unwrap();
        let mixed = residual_lqd(&f, &g, 0.3).unwrap();
        assert!(blind < 0.05, "blind {blind}");
        assert!(mixed > 10.0 * 1e-3 && mixed > 5.0 * blind, "mixed {mixed}");
    }
}
