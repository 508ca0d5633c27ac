//! Distance-based node detectors, their union (the transformation tree) and
//! the functional directional outlyingness detector in quantile space.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::density::{cdf_and_quantile, check_region, differentiate, mix_uniform, region_weights, DensityFn, GridCurve};
use crate::error::{Error, Result};
use crate::scalar::{boxplot_detect, mad, median, BoxplotParams};
use crate::transforms::{clr_batch, h_centralize, lqd, nlqd, phase_distance, pointwise_median, FeaturePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DistanceKind {
    L1,
    L2,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NodeKind {
    Med,
    Nlqd,
    Clr,
    Diff,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Med => "MED",
            NodeKind::Nlqd => "nLQD",
            NodeKind::Clr => "CLR",
            NodeKind::Diff => "DIFF",
        }
    }
}

/// One distance with the whisker of its one-sided boxplot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Check {
    pub distance: DistanceKind,
    pub whisker: f64,
}

impl Check {
    pub fn new(distance: DistanceKind, whisker: f64) -> Self {
        Self { distance, whisker }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "node", rename_all = "snake_case"))]
pub enum NodeConfig {
    /// Two-sided boxplot on the medians of the densities.
    Med { whisker: f64 },
    /// Normalized LQD curves; every (region, check) pair is screened and the
    /// detections are merged.
    Nlqd { alpha: f64, checks: Vec<Check>, regions: Vec<(f64, f64)> },
    /// clr curves after horizontal centralization, L2 distance over the
    /// common support.
    Clr { alpha: f64, whisker: f64, feature: FeaturePoint },
    /// First derivatives of the densities.
    Diff { checks: Vec<Check>, region: (f64, f64) },
}

impl NodeConfig {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeConfig::Med { .. } => NodeKind::Med,
            NodeConfig::Nlqd { .. } => NodeKind::Nlqd,
            NodeConfig::Clr { .. } => NodeKind::Clr,
            NodeConfig::Diff { .. } => NodeKind::Diff,
        }
    }

    pub fn default_for(kind: NodeKind) -> Self {
        match kind {
            NodeKind::Med => NodeConfig::Med { whisker: 1.5 },
            NodeKind::Nlqd => NodeConfig::Nlqd {
                alpha: 1e-10,
                checks: vec![Check::new(DistanceKind::L1, 2.5), Check::new(DistanceKind::Linf, 3.5)],
                regions: vec![(0.2, 0.8), (0.4, 0.6)],
            },
            NodeKind::Clr => NodeConfig::Clr { alpha: 0.1, whisker: 2.5, feature: FeaturePoint::AvgMedianMode },
            NodeKind::Diff => NodeConfig::Diff {
                checks: vec![Check::new(DistanceKind::L1, 2.5), Check::new(DistanceKind::Linf, 3.5)],
                region: (0.0, 1.0),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let whisker_ok = |w: f64| if w > 0.0 { Ok(()) } else { Err(crate::error::param("whisker", w)) };
        let region_ok = |(a, b): (f64, f64)| {
            if a < b && a >= 0.0 && b <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name: "region", value: if a < b { b } else { a } })
            }
        };
        match self {
            NodeConfig::Med { whisker } => whisker_ok(*whisker),
            NodeConfig::Nlqd { checks, regions, .. } => {
                checks.iter().try_for_each(|c| whisker_ok(c.whisker))?;
                regions.iter().copied().try_for_each(region_ok)
            }
            NodeConfig::Clr { whisker, .. } => whisker_ok(*whisker),
            NodeConfig::Diff { checks, region } => {
                checks.iter().try_for_each(|c| whisker_ok(c.whisker))?;
                region_ok(*region)
            }
        }
    }
}

/// The four default nodes.
pub fn default_tree() -> Vec<NodeConfig> {
    [NodeKind::Med, NodeKind::Nlqd, NodeKind::Clr, NodeKind::Diff].into_iter().map(NodeConfig::default_for).collect()
}

/// What flagged a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Node(NodeKind),
    FdoMo,
    FdoVo,
    Phase,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub method: Method,
    pub distance: Option<DistanceKind>,
    pub region: Option<(f64, f64)>,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionReport {
    /// Number of curves screened.
    pub n: usize,
    pub hits: BTreeMap<usize, Vec<Provenance>>,
}

impl DetectionReport {
    pub fn empty(n: usize) -> Self {
        Self { n, hits: BTreeMap::new() }
    }

    pub fn flag(&mut self, index: usize, why: Provenance) {
        self.hits.entry(index).or_default().push(why);
    }

    pub fn merge(&mut self, other: DetectionReport) {
        self.n = self.n.max(other.n);
        for (i, mut p) in other.hits {
            self.hits.entry(i).or_default().append(&mut p);
        }
    }

    pub fn flagged(&self) -> Vec<usize> {
        self.hits.keys().copied().collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.hits.contains_key(&index)
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// Flags `indices`, recording `scores[i]` under `method`.
    pub(crate) fn flag_all(
        &mut self,
        indices: &[usize],
        scores: &[f64],
        method: Method,
        distance: Option<DistanceKind>,
        region: Option<(f64, f64)>,
    ) {
        for &i in indices {
            self.flag(i, Provenance { method, distance, region, score: scores[i] });
        }
    }
}

fn common_grid(curves: &[GridCurve]) -> Result<&GridCurve> {
    let first = curves.first().ok_or(Error::TooFew { need: 1, got: 0 })?;
    if curves.iter().any(|c| !c.same_grid(first)) {
        return Err(Error::DomainMismatch);
    }
    Ok(first)
}

/// Distance of every curve to the pointwise median over `region`.
///
/// L1 and L2 integrate the interpolated pointwise gap over the region;
/// Linf takes the largest gap at grid nodes inside it.
pub fn distance_scores(curves: &[GridCurve], d: DistanceKind, region: (f64, f64)) -> Result<Vec<f64>> {
    let first = common_grid(curves)?;
    check_region(first, region)?;
    let center = pointwise_median(curves)?;
    let (start, h, n) = (first.start(), first.step(), first.len());
    let weights = region_weights(n, start, h, region.0, region.1);
    let tol = 1e-12 * first.width().max(1.0);
    let inside: Vec<usize> = (0..n)
        .filter(|&j| {
            let x = first.x(j);
            x >= region.0 - tol && x <= region.1 + tol
        })
        .collect();
    Ok(curves
        .iter()
        .map(|c| {
            let gap = |j: usize| (c.values()[j] - center.values()[j]).abs();
            match d {
                DistanceKind::L1 => (0..n).map(|j| weights[j] * gap(j)).sum(),
                DistanceKind::L2 => libm::sqrt((0..n).map(|j| weights[j] * gap(j) * gap(j)).sum::<f64>()),
                DistanceKind::Linf => inside.iter().map(|&j| gap(j)).fold(0.0, f64::max),
            }
        })
        .collect())
}

fn screen(
    report: &mut DetectionReport,
    curves: &[GridCurve],
    check: Check,
    region: (f64, f64),
    method: Method,
) -> Result<()> {
    let scores = distance_scores(curves, check.distance, region)?;
    let hits = boxplot_detect(&scores, BoxplotParams::one_sided(check.whisker));
    report.flag_all(&hits, &scores, method, Some(check.distance), Some(region));
    Ok(())
}

/// Normalized LQD curves, falling back to the raw curve when its integral
/// vanishes.
pub fn nlqd_curves(pdfs: &[DensityFn], alpha: f64) -> Result<Vec<GridCurve>> {
    pdfs.iter()
        .map(|f| {
            let psi = lqd(f, alpha)?;
            match nlqd(&psi) {
                Ok(n) => Ok(n.curve),
                Err(Error::Degenerate(_)) => {
                    log::warn!("near-uniform density: using its unnormalized LQD");
                    Ok(psi.curve)
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Runs one node of the tree.
pub fn node_detect(pdfs: &[DensityFn], cfg: &NodeConfig) -> Result<DetectionReport> {
    if pdfs.len() < 4 {
        return Err(Error::TooFew { need: 4, got: pdfs.len() });
    }
    cfg.validate()?;
    let mut report = DetectionReport::empty(pdfs.len());
    let method = Method::Node(cfg.kind());
    match cfg {
        NodeConfig::Med { whisker } => {
            let meds: Vec<f64> = pdfs.iter().map(crate::density::median_of).collect();
            let hits = boxplot_detect(&meds, BoxplotParams::two_sided(*whisker));
            report.flag_all(&hits, &meds, method, None, None);
        }
        NodeConfig::Nlqd { alpha, checks, regions } => {
            let curves = nlqd_curves(pdfs, *alpha)?;
            for &region in regions {
                for &check in checks {
                    screen(&mut report, &curves, check, region, method)?;
                }
            }
        }
        NodeConfig::Clr { alpha, whisker, feature } => {
            let aligned = h_centralize(pdfs, *feature)?;
            let curves = clr_batch(&aligned.curves, *alpha)?;
            screen(&mut report, &curves, Check::new(DistanceKind::L2, *whisker), aligned.support, method)?;
        }
        NodeConfig::Diff { checks, region } => {
            let curves: Vec<GridCurve> = pdfs.iter().map(|f| differentiate(f)).collect();
            for &check in checks {
                screen(&mut report, &curves, check, *region, method)?;
            }
        }
    }
    Ok(report)
}

/// Union of the node detections.
pub fn tree_detect(pdfs: &[DensityFn], cfgs: &[NodeConfig]) -> Result<DetectionReport> {
    let mut seen: Vec<NodeKind> = Vec::new();
    for c in cfgs {
        if seen.contains(&c.kind()) {
            return Err(Error::DuplicateNode(c.kind().name()));
        }
        seen.push(c.kind());
    }
    let mut report = DetectionReport::empty(pdfs.len());
    for c in cfgs {
        report.merge(node_detect(pdfs, c)?);
    }
    Ok(report)
}

/// Phase outlyingness: the mean phase distance of each density to all the
/// others, screened with a one-sided boxplot. If any density dips below 0.1
/// the whole sample is first mixed with `alpha` of the uniform.
pub fn phase_detect(pdfs: &[DensityFn], alpha: f64, whisker: f64) -> Result<DetectionReport> {
    let n = pdfs.len();
    if n < 4 {
        return Err(Error::TooFew { need: 4, got: n });
    }
    if !(whisker > 0.0) {
        return Err(crate::error::param("whisker", whisker));
    }
    let low = pdfs.iter().any(|f| f.min() < 0.1);
    let mixed: Vec<DensityFn> = if low {
        pdfs.iter().map(|f| mix_uniform(f, alpha)).collect::<Result<_>>()?
    } else {
        pdfs.to_vec()
    };
    let mut total = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = phase_distance(&mixed[i], &mixed[j], 0.0)?.distance;
            total[i] += d;
            total[j] += d;
        }
    }
    let scores: Vec<f64> = total.iter().map(|t| t / (n - 1) as f64).collect();
    let mut report = DetectionReport::empty(n);
    let hits = boxplot_detect(&scores, BoxplotParams::one_sided(whisker));
    report.flag_all(&hits, &scores, Method::Phase, None, None);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutlyingnessPair {
    /// Mean directional outlyingness.
    pub mo: f64,
    /// Variation of the directional outlyingness around `mo`.
    pub vo: f64,
}

/// Mean and variation of the pointwise directional outlyingness
/// `(x_i(t) − med(t)) / MAD(t)` over `region`, weighted by `1/λ(region)`.
///
/// Grid nodes where the cross-sectional MAD vanishes are dropped from both
/// integrals.
pub fn fdo_outlyingness(curves: &[GridCurve], region: (f64, f64)) -> Result<Vec<OutlyingnessPair>> {
    let first = common_grid(curves)?;
    check_region(first, region)?;
    let n = first.len();
    let mut weights = region_weights(n, first.start(), first.step(), region.0, region.1);
    let mut med = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut column = Vec::with_capacity(curves.len());
    let mut dropped = 0;
    for j in 0..n {
        if weights[j] == 0.0 {
            continue;
        }
        column.clear();
        column.extend(curves.iter().map(|c| c.values()[j]));
        med[j] = median(&column)?;
        scale[j] = mad(&column)?;
        if scale[j] < 1e-12 {
            weights[j] = 0.0;
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} grid points with zero MAD left out of the outlyingness integrals");
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok(vec![OutlyingnessPair { mo: 0.0, vo: 0.0 }; curves.len()]);
    }
    Ok(curves
        .iter()
        .map(|c| {
            let dir = |j: usize| (c.values()[j] - med[j]) / scale[j];
            let live = || (0..n).filter(|&j| weights[j] > 0.0);
            let mo = live().map(|j| weights[j] * dir(j)).sum::<f64>() / total;
            let vo = live().map(|j| weights[j] * (dir(j) - mo) * (dir(j) - mo)).sum::<f64>() / total;
            OutlyingnessPair { mo, vo }
        })
        .collect())
}

/// Outlyingness on the quantile functions: MO is screened with a two-sided
/// boxplot, VO with a one-sided one, and the detections are merged.
pub fn qf_fdo_detect(
    pdfs: &[DensityFn],
    alpha: f64,
    region: (f64, f64),
    mo_whisker: f64,
    vo_whisker: f64,
) -> Result<DetectionReport> {
    if pdfs.len() < 4 {
        return Err(Error::TooFew { need: 4, got: pdfs.len() });
    }
    let qs = pdfs.iter().map(|f| cdf_and_quantile(f, alpha).map(|(_, q)| q)).collect::<Result<Vec<_>>>()?;
    let out = fdo_outlyingness(&qs, region)?;
    let mo: Vec<f64> = out.iter().map(|p| p.mo).collect();
    let vo: Vec<f64> = out.iter().map(|p| p.vo).collect();
    let mut report = DetectionReport::empty(pdfs.len());
    let hits = boxplot_detect(&mo, BoxplotParams::two_sided(mo_whisker));
    report.flag_all(&hits, &mo, Method::FdoMo, None, Some(region));
    let hits = boxplot_detect(&vo, BoxplotParams::one_sided(vo_whisker));
    report.flag_all(&hits, &vo, Method::FdoVo, None, Some(region));
    Ok(report)
}

/// Directional outlyingness of one value against a cross-section.
pub fn directional_outlyingness(x: f64, cross_section: &[f64]) -> Result<f64> {
    let m = median(cross_section)?;
    let s = mad(cross_section)?;
    if s < 1e-12 {
        return Err(Error::Degenerate("zero MAD".into()));
    }
    Ok((x - m) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GRID_SIZE;

    fn flat(c: f64) -> GridCurve {
        GridCurve::unit(|_| c)
    }

    #[test]
    fn distance_examples() {
        let same = vec![flat(1.0); 6];
        for d in [DistanceKind::L1, DistanceKind::L2, DistanceKind::Linf] {
            assert!(distance_scores(&same, d, (0.0, 1.0)).unwrap().iter().all(|&v| v == 0.0));
        }
        let mut cs = vec![flat(0.0); 6];
        cs[2] = flat(1.0);
        let l1 = distance_scores(&cs, DistanceKind::L1, (0.0, 1.0)).unwrap();
        assert!((l1[2] - 1.0).abs() < 1e-12 && l1.iter().enumerate().all(|(i, &v)| i == 2 || v == 0.0));
        let linf = distance_scores(&cs, DistanceKind::Linf, (0.0, 1.0)).unwrap();
        assert_eq!(linf[2], 1.0);
        let part = distance_scores(&cs, DistanceKind::L1, (0.25, 0.5)).unwrap();
        assert!((part[2] - 0.25).abs() < 1e-12);
        assert!(distance_scores(&cs, DistanceKind::L1, (0.5, 1.5)).is_err());
    }

    #[test]
    fn fdo_examples() {
        let cs = [flat(1.0), flat(2.0), flat(3.0)];
        let out = fdo_outlyingness(&cs, (0.0, 1.0)).unwrap();
        assert!(out[1].mo.abs() < 1e-12 && out[1].vo.abs() < 1e-12);
        assert!((out[2].mo - 1.0 / 1.4826).abs() < 1e-12);
        assert!(out[2].vo.abs() < 1e-20);
        assert!((directional_outlyingness(3.0, &[1.0, 2.0, 3.0]).unwrap() - 0.6745).abs() < 1e-4);
    }

    #[test]
    fn fdo_on_identical_curves_is_zero() {
        let cs = vec![GridCurve::unit(|x| x * x); 5];
        let out = fdo_outlyingness(&cs, (0.2, 0.8)).unwrap();
        assert!(out.iter().all(|p| p.mo == 0.0 && p.vo == 0.0));
    }

    #[test]
    fn tree_rejects_duplicates() {
        let pdfs = vec![DensityFn::uniform(GRID_SIZE); 5];
        let cfgs = [NodeConfig::default_for(NodeKind::Med), NodeConfig::Med { whisker: 3.0 }];
        assert_eq!(tree_detect(&pdfs, &cfgs), Err(Error::DuplicateNode("MED")));
        assert!(tree_detect(&pdfs, &[]).unwrap().is_empty());
    }

    #[test]
    fn identical_densities_flag_nothing() {
        let b = DensityFn::from_unit_fn(|x| x * x * (1.0 - x)).unwrap();
        let pdfs = vec![b; 8];
        assert!(tree_detect(&pdfs, &default_tree()).unwrap().is_empty());
        assert!(qf_fdo_detect(&pdfs, 1e-10, (0.2, 0.8), 1.5, 1.5).unwrap().is_empty());
    }

    #[test]
    fn phase_flags_the_shifted_density() {
        let mut pdfs: Vec<DensityFn> = (0..12)
            .map(|i| {
                let a = 4.0 + 0.1 * i as f64;
                DensityFn::from_unit_fn(|x| libm::pow(x, a - 1.0) * libm::pow(1.0 - x, 4.0)).unwrap()
            })
            .collect();
        pdfs[5] = DensityFn::from_unit_fn(|x| libm::pow(x, 1.5) * libm::pow(1.0 - x, 9.0)).unwrap();
        let rep = phase_detect(&pdfs, 0.1, 2.0).unwrap();
        assert_eq!(rep.flagged(), vec![5]);
        assert!(rep.hits[&5][0].method == Method::Phase);
        assert!(phase_detect(&pdfs[..3], 0.1, 2.0).is_err());
    }

    #[test]
    fn too_few_curves() {
        let pdfs = vec![DensityFn::uniform(GRID_SIZE); 3];
        assert!(node_detect(&pdfs, &NodeConfig::Med { whisker: 1.5 }).is_err());
    }
}
