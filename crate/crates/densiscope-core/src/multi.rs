//! Multiple detection: the tree and QF-FDO detectors are rerun over a
//! Cartesian grid of arguments, runs with abnormally many detections are
//! dropped, and each curve is ranked by how often the remaining runs flag it.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::density::DensityFn;
use crate::error::{param, Error, Result};
use crate::functional::{node_detect, qf_fdo_detect, Check, DistanceKind, NodeConfig};
use crate::scalar::Fences;
use crate::transforms::FeaturePoint;

/// Argument lists for the tree; one run per element of the product.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeGrid {
    pub nlqd_alphas: Vec<f64>,
    pub nlqd_regions: Vec<(f64, f64)>,
    /// (L1, Linf) whiskers.
    pub nlqd_whiskers: Vec<(f64, f64)>,
    pub clr_alphas: Vec<f64>,
    pub clr_whiskers: Vec<f64>,
    pub diff_regions: Vec<(f64, f64)>,
    pub diff_whiskers: Vec<(f64, f64)>,
    pub med_whiskers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FdoGrid {
    pub alphas: Vec<f64>,
    pub regions: Vec<(f64, f64)>,
    pub vo_whiskers: Vec<f64>,
    pub mo_whiskers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamGrid {
    pub tree: Option<TreeGrid>,
    pub fdo: Option<FdoGrid>,
}

const ALPHAS: [f64; 3] = [1e-10, 1e-6, 1e-2];
const REGIONS: [(f64, f64); 3] = [(0.001, 0.999), (0.1, 0.9), (0.2, 0.8)];
const WHISKER_PAIRS: [(f64, f64); 3] = [(2.0, 3.0), (2.5, 3.5), (3.5, 4.5)];

impl Default for ParamGrid {
    /// 243 tree runs and 36 QF-FDO runs.
    fn default() -> Self {
        Self {
            tree: Some(TreeGrid {
                nlqd_alphas: ALPHAS.to_vec(),
                nlqd_regions: REGIONS.to_vec(),
                nlqd_whiskers: WHISKER_PAIRS.to_vec(),
                clr_alphas: vec![0.1],
                clr_whiskers: vec![2.0, 2.5, 3.5],
                diff_regions: vec![(0.0, 1.0)],
                diff_whiskers: WHISKER_PAIRS.to_vec(),
                med_whiskers: vec![1.5],
            }),
            fdo: Some(FdoGrid {
                alphas: ALPHAS.to_vec(),
                regions: REGIONS.to_vec(),
                vo_whiskers: vec![1.5, 2.0, 2.5, 3.0],
                mo_whiskers: vec![1.5],
            }),
        }
    }
}

fn pair_checks((l1, linf): (f64, f64)) -> Vec<Check> {
    vec![Check::new(DistanceKind::L1, l1), Check::new(DistanceKind::Linf, linf)]
}

impl TreeGrid {
    /// Distinct configurations of each node, in the order nLQD, CLR, DIFF,
    /// MED.
    fn node_lists(&self) -> [Vec<NodeConfig>; 4] {
        let mut nlqd = Vec::new();
        for &alpha in &self.nlqd_alphas {
            for &region in &self.nlqd_regions {
                for &w in &self.nlqd_whiskers {
                    nlqd.push(NodeConfig::Nlqd { alpha, checks: pair_checks(w), regions: vec![region] });
                }
            }
        }
        let mut clr = Vec::new();
        for &alpha in &self.clr_alphas {
            for &whisker in &self.clr_whiskers {
                clr.push(NodeConfig::Clr { alpha, whisker, feature: FeaturePoint::AvgMedianMode });
            }
        }
        let mut diff = Vec::new();
        for &region in &self.diff_regions {
            for &w in &self.diff_whiskers {
                diff.push(NodeConfig::Diff { checks: pair_checks(w), region });
            }
        }
        let med = self.med_whiskers.iter().map(|&whisker| NodeConfig::Med { whisker }).collect();
        [nlqd, clr, diff, med]
    }

    pub fn size(&self) -> usize {
        self.node_lists().iter().map(Vec::len).product()
    }
}

impl FdoGrid {
    pub fn size(&self) -> usize {
        self.alphas.len() * self.regions.len() * self.vo_whiskers.len() * self.mo_whiskers.len()
    }
}

impl ParamGrid {
    pub fn size(&self) -> usize {
        self.tree.as_ref().map_or(0, TreeGrid::size) + self.fdo.as_ref().map_or(0, FdoGrid::size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DetectorKind {
    Tree,
    QfFdo,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "detector", rename_all = "snake_case"))]
pub enum RunParams {
    Tree { nodes: Vec<NodeConfig> },
    QfFdo { alpha: f64, region: (f64, f64), mo_whisker: f64, vo_whisker: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub id: usize,
    pub params: RunParams,
    pub flagged: Vec<usize>,
    pub count: usize,
    /// Set when the run failed; such runs are never retained.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn detector(&self) -> DetectorKind {
        match self.params {
            RunParams::Tree { .. } => DetectorKind::Tree,
            RunParams::QfFdo { .. } => DetectorKind::QfFdo,
        }
    }

    fn new(id: usize, params: RunParams, outcome: core::result::Result<Vec<usize>, String>) -> Self {
        match outcome {
            Ok(flagged) => Self { id, params, count: flagged.len(), flagged, error: None },
            Err(e) => Self { id, params, flagged: Vec::new(), count: 0, error: Some(e) },
        }
    }
}

/// Runs every combination of the grid. Tree runs reuse one detection per
/// distinct node configuration; a failing node marks every run using it.
pub fn run_grid(pdfs: &[DensityFn], grid: &ParamGrid) -> Result<Vec<RunRecord>> {
    let size = grid.size();
    if size < 2 {
        return Err(param("grid size", size as f64));
    }
    let mut records = Vec::with_capacity(size);
    if let Some(tree) = &grid.tree {
        let lists = tree.node_lists();
        let memo: Vec<Vec<core::result::Result<Vec<usize>, String>>> = lists
            .iter()
            .map(|list| {
                list.iter().map(|cfg| node_detect(pdfs, cfg).map(|r| r.flagged()).map_err(|e| e.to_string())).collect()
            })
            .collect();
        let [a, b, c, d] = [lists[0].len(), lists[1].len(), lists[2].len(), lists[3].len()];
        for i in 0..a {
            for j in 0..b {
                for k in 0..c {
                    for l in 0..d {
                        let picks = [i, j, k, l];
                        let nodes: Vec<NodeConfig> = picks.iter().zip(&lists).map(|(&p, list)| list[p].clone()).collect();
                        let mut union: Vec<usize> = Vec::new();
                        let mut failure = None;
                        for (node, &p) in picks.iter().enumerate() {
                            match &memo[node][p] {
                                Ok(f) => union.extend_from_slice(f),
                                Err(e) => failure = Some(e.clone()),
                            }
                        }
                        union.sort_unstable();
                        union.dedup();
                        let outcome = failure.map_or(Ok(union), Err);
                        records.push(RunRecord::new(records.len(), RunParams::Tree { nodes }, outcome));
                    }
                }
            }
        }
    }
    if let Some(fdo) = &grid.fdo {
        for &alpha in &fdo.alphas {
            for &region in &fdo.regions {
                for &vo_whisker in &fdo.vo_whiskers {
                    for &mo_whisker in &fdo.mo_whiskers {
                        let outcome = qf_fdo_detect(pdfs, alpha, region, mo_whisker, vo_whisker)
                            .map(|r| r.flagged())
                            .map_err(|e| e.to_string());
                        let params = RunParams::QfFdo { alpha, region, mo_whisker, vo_whisker };
                        records.push(RunRecord::new(records.len(), params, outcome));
                    }
                }
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterOutcome {
    pub retained: Vec<usize>,
    /// Runs whose count exceeded the fence.
    pub unstable: Vec<usize>,
    pub failed: Vec<usize>,
    pub fence: f64,
}

/// Drops successful runs whose count lies strictly above the one-sided
/// boxplot fence of all successful counts. Failed runs are set aside first.
pub fn filter_unstable(records: &[RunRecord], whisker: f64) -> Result<FilterOutcome> {
    if !(whisker > 0.0) {
        return Err(param("whisker", whisker));
    }
    let (ok, failed): (Vec<&RunRecord>, Vec<&RunRecord>) = records.iter().partition(|r| r.error.is_none());
    if ok.len() < 4 {
        return Err(Error::TooFew { need: 4, got: ok.len() });
    }
    let counts: Vec<f64> = ok.iter().map(|r| r.count as f64).collect();
    let fences = Fences::new(&counts, whisker)?;
    let (unstable, retained): (Vec<&RunRecord>, Vec<&RunRecord>) = ok.iter().partition(|r| fences.above(r.count as f64));
    Ok(FilterOutcome {
        retained: retained.iter().map(|r| r.id).collect(),
        unstable: unstable.iter().map(|r| r.id).collect(),
        failed: failed.iter().map(|r| r.id).collect(),
        fence: fences.upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Severity {
    Mild,
    Moderate,
    Heavy,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiReport {
    pub retained_ids: Vec<usize>,
    /// Number of retained runs flagging each index; only flagged indices
    /// appear.
    pub frequencies: BTreeMap<usize, usize>,
    pub severity: BTreeMap<usize, Severity>,
}

impl MultiReport {
    pub fn retained_total(&self) -> usize {
        self.retained_ids.len()
    }

    /// Indices flagged by at least one retained run.
    pub fn flagged(&self) -> Vec<usize> {
        self.frequencies.keys().copied().collect()
    }
}

/// Detection frequencies over `retained` with severity classes cut at
/// `breaks` fractions of the largest frequency.
pub fn consolidate(retained: &[&RunRecord], breaks: (f64, f64)) -> Result<MultiReport> {
    if retained.is_empty() {
        return Err(Error::TooFew { need: 1, got: 0 });
    }
    if !(0.0 <= breaks.0 && breaks.0 <= breaks.1 && breaks.1 <= 1.0) {
        return Err(param("severity break", breaks.1));
    }
    let mut frequencies: BTreeMap<usize, usize> = BTreeMap::new();
    for r in retained {
        for &i in &r.flagged {
            *frequencies.entry(i).or_default() += 1;
        }
    }
    let top = frequencies.values().copied().max().unwrap_or(0) as f64;
    let severity = frequencies
        .iter()
        .map(|(&i, &j)| {
            let ratio = j as f64 / top;
            let class = if ratio > breaks.1 {
                Severity::Heavy
            } else if ratio <= breaks.0 {
                Severity::Mild
            } else {
                Severity::Moderate
            };
            (i, class)
        })
        .collect();
    Ok(MultiReport { retained_ids: retained.iter().map(|r| r.id).collect(), frequencies, severity })
}

pub const DEFAULT_BREAKS: (f64, f64) = (1.0 / 3.0, 2.0 / 3.0);

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiOutcome {
    pub runs: Vec<RunRecord>,
    pub filter: FilterOutcome,
    pub report: MultiReport,
}

/// [`run_grid`], [`filter_unstable`] and [`consolidate`] in sequence.
pub fn multi_detect(pdfs: &[DensityFn], grid: &ParamGrid, whisker: f64, breaks: (f64, f64)) -> Result<MultiOutcome> {
    let runs = run_grid(pdfs, grid)?;
    let filter = filter_unstable(&runs, whisker)?;
    let kept: Vec<&RunRecord> = filter.retained.iter().map(|&id| &runs[id]).collect();
    let report = consolidate(&kept, breaks)?;
    Ok(MultiOutcome { runs, filter, report })
}
