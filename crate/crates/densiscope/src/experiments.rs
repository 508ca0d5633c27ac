//! Monte-Carlo reproductions of the benchmark tables.
//!
//! Every (row, repetition) task draws from its own substream of the seed, so
//! results do not depend on thread scheduling or on which rows are selected.
//! Rows are averaged over the repetitions that succeeded; failures are logged
//! and counted.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{ensure, Context, Result};
use densiscope_core::density::{l1_distance, DensityFn};
use densiscope_core::functional::{default_tree, node_detect, phase_detect, qf_fdo_detect, NodeConfig};
use densiscope_core::metrics::detection_metrics;
use densiscope_core::regoutlier::{detect_regression_outliers, robust_weights, RegDetectParams};
use densiscope_core::regression::{fit, FitParams, RegressionModel};
use densiscope_core::scalar::median;
use densiscope_core::simgen::{
    exchange_contaminate, gen_pairs, gen_scenario_pdfs, gen_sinusoid_dataset, insert_contaminate, insert_outliers,
    PairVariant, RandomStream, Scenario, MODEL_ETA,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "table2")]
    Table2,
    #[serde(rename = "table3")]
    Table3,
    #[serde(rename = "table4_phase")]
    Table4Phase,
    #[serde(rename = "table7")]
    Table7,
    #[serde(rename = "tableA5")]
    TableA5,
    #[serde(rename = "tableA9")]
    TableA9,
    #[serde(rename = "robust_regression")]
    RobustRegression,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Table2,
        ExperimentKind::Table3,
        ExperimentKind::Table4Phase,
        ExperimentKind::Table7,
        ExperimentKind::TableA5,
        ExperimentKind::TableA9,
        ExperimentKind::RobustRegression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Table3 => "table3",
            ExperimentKind::Table4Phase => "table4_phase",
            ExperimentKind::Table7 => "table7",
            ExperimentKind::TableA5 => "tableA5",
            ExperimentKind::TableA9 => "tableA9",
            ExperimentKind::RobustRegression => "robust_regression",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .with_context(|| format!("unknown experiment `{s}`"))
    }
}

/// Parameter overrides; unset fields keep the defaults of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Indices into the full row list of the table; all rows when unset.
    pub rows: Option<Vec<usize>>,
    /// Sample size (curves or pairs).
    pub n: Option<usize>,
    /// Planted outliers for the single-sample tables.
    pub outliers: usize,
    pub zeta_hs: f64,
    /// 0.2 for the single-sample tables and 0.25 for the pair experiments
    /// when unset.
    pub varpi: Option<f64>,
    /// Nodes of the tree (tables 2 and A5).
    pub tree: Option<Vec<NodeConfig>>,
    pub fdo_alpha: f64,
    pub fdo_region: (f64, f64),
    pub mo_whisker: f64,
    pub vo_whiskers: Vec<f64>,
    pub phase_alpha: f64,
    pub phase_whisker: f64,
    pub regoutlier: RegDetectParams,
    pub lambda_s: f64,
    pub lqd_alpha: f64,
    pub m: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub train: usize,
    pub test: usize,
    /// (M_g, M_f) exchanges applied to the robust-regression training set.
    pub exchange: (usize, usize),
    /// (N_g, N_f) insertions applied to the robust-regression training set.
    pub insert: (usize, usize),
}

impl Default for Overrides {
    fn default() -> Self {
        Self {
            rows: None,
            n: None,
            outliers: 10,
            zeta_hs: 0.0,
            varpi: None,
            tree: None,
            fdo_alpha: 1e-10,
            fdo_region: (0.2, 0.8),
            mo_whisker: 1.5,
            vo_whiskers: vec![1.5, 2.0, 2.5],
            phase_alpha: 0.1,
            phase_whisker: 2.0,
            regoutlier: RegDetectParams::default(),
            lambda_s: 0.1,
            lqd_alpha: 0.3,
            m: 5,
            rho1: 1.0,
            rho2: 1.0,
            train: 85,
            test: 35,
            exchange: (2, 3),
            insert: (4, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
    /// CSV destination; the manifest goes next to it with a `.json`
    /// extension.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, repetitions: usize, seed: u64) -> Self {
        Self { kind, repetitions, seed, overrides: Overrides::default(), output: None }
    }

    pub fn rows(mut self, rows: &[usize]) -> Self {
        self.overrides.rows = Some(rows.to_vec());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Index in the full row list of the table.
    pub index: usize,
    pub labels: Vec<String>,
    /// Averages over the successful repetitions; `None` for cells the table
    /// leaves blank or when every repetition failed.
    pub values: Vec<Option<f64>>,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub spec: ExperimentSpec,
    pub label_headers: Vec<String>,
    pub value_headers: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl ExperimentTable {
    pub fn value(&self, row: usize, header: &str) -> Option<f64> {
        let col = self.value_headers.iter().position(|h| h == header)?;
        self.rows.iter().find(|r| r.index == row)?.values[col]
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().map(|r| r.failed).sum()
    }

    pub fn to_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let header: Vec<&str> = self
            .label_headers
            .iter()
            .chain(&self.value_headers)
            .map(String::as_str)
            .chain(["completed", "failed"])
            .collect();
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = r.labels.clone();
            rec.extend(r.values.iter().map(|v| v.map_or("—".to_owned(), |v| format!("{v:.4}"))));
            rec.push(r.completed.to_string());
            rec.push(r.failed.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes the CSV table and, next to it, the JSON manifest with the spec
    /// and full-precision values.
    pub fn save(&self, csv_path: &Path) -> Result<PathBuf> {
        let file = std::fs::File::create(csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
        self.to_csv(file)?;
        let manifest = csv_path.with_extension("json");
        let file = std::fs::File::create(&manifest).with_context(|| format!("creating {}", manifest.display()))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(manifest)
    }
}

/// Row labels, and whether the table leaves the row blank.
struct RowPlan {
    labels: Vec<String>,
    blank: bool,
}

struct Plan {
    label_headers: Vec<String>,
    value_headers: Vec<String>,
    rows: Vec<RowPlan>,
}

const ROMAN: [&str; 4] = ["I", "II", "III", "IV"];

fn scenario_rows() -> Vec<RowPlan> {
    let mut rows = Vec::new();
    for (s, name) in [(Scenario::I, "Scenario I"), (Scenario::II, "Scenario II")] {
        for (m, roman) in ROMAN.iter().enumerate() {
            // Model I has η = 0 in both scenarios, so Scenario II repeats it.
            let blank = s == Scenario::II && m == 0;
            rows.push(RowPlan { labels: vec![name.to_owned(), format!("Model {roman}")], blank });
        }
    }
    rows
}

fn scenario_of(row: usize) -> (Scenario, f64) {
    let s = if row < 4 { Scenario::I } else { Scenario::II };
    (s, MODEL_ETA[row % 4])
}

const TABLE7_CELLS: [(usize, usize); 4] = [(0, 5), (2, 3), (4, 1), (5, 0)];
const TABLEA9_CELLS: [(usize, usize); 7] = [(10, 0), (8, 2), (6, 4), (5, 5), (4, 6), (2, 8), (0, 10)];

fn rate_headers(columns: &[String]) -> Vec<String> {
    columns.iter().flat_map(|c| [format!("{c} p_c"), format!("{c} p_f")]).collect()
}

fn tree_of(o: &Overrides) -> Vec<NodeConfig> {
    o.tree.clone().unwrap_or_else(default_tree)
}

fn tree_columns(o: &Overrides) -> Vec<String> {
    tree_of(o).iter().map(|c| c.kind().name().to_owned()).chain(["TREE".to_owned()]).collect()
}

fn plan(kind: ExperimentKind, o: &Overrides) -> Plan {
    let strings = |xs: &[&str]| xs.iter().map(|s| (*s).to_owned()).collect::<Vec<_>>();
    let pair_rows = |cells: &[(usize, usize)]| {
        cells.iter().map(|(a, b)| RowPlan { labels: vec![a.to_string(), b.to_string()], blank: false }).collect()
    };
    match kind {
        ExperimentKind::Table2 => Plan {
            label_headers: strings(&["Scenario", "Model"]),
            value_headers: rate_headers(&tree_columns(o)),
            rows: scenario_rows(),
        },
        ExperimentKind::Table3 => Plan {
            label_headers: strings(&["Scenario", "Model"]),
            value_headers: rate_headers(&o.vo_whiskers.iter().map(|w| format!("VO {w:.1}")).collect::<Vec<_>>()),
            rows: scenario_rows(),
        },
        ExperimentKind::Table4Phase => Plan {
            label_headers: strings(&["Scenario", "Model"]),
            value_headers: rate_headers(&["PHASE".to_owned()]),
            rows: scenario_rows(),
        },
        ExperimentKind::Table7 => Plan {
            label_headers: strings(&["M_g", "M_f"]),
            value_headers: strings(&["p_c", "p_f"]),
            rows: pair_rows(&TABLE7_CELLS),
        },
        ExperimentKind::TableA5 => Plan {
            label_headers: strings(&["Dataset"]),
            value_headers: rate_headers(&tree_columns(o)),
            rows: vec![RowPlan { labels: strings(&["sinusoid"]), blank: false }],
        },
        ExperimentKind::TableA9 => Plan {
            label_headers: strings(&["N_g", "N_f"]),
            value_headers: strings(&["p_c", "p_f"]),
            rows: pair_rows(&TABLEA9_CELLS),
        },
        ExperimentKind::RobustRegression => Plan {
            label_headers: strings(&["Dataset"]),
            value_headers: strings(&["robust median IAE", "standard median IAE", "robust wins"]),
            rows: vec![RowPlan { labels: strings(&["A5 pairs, 20% contaminated"]), blank: false }],
        },
    }
}

fn rates(flagged: &[usize], truth: &[usize], n: usize) -> [f64; 2] {
    let m = detection_metrics(flagged, truth, n);
    [m.p_c.unwrap_or(f64::NAN), m.p_f]
}

fn scenario_sample(row: usize, o: &Overrides, rng: &mut RandomStream) -> Result<(Vec<DensityFn>, Vec<usize>)> {
    let (s, eta) = scenario_of(row);
    let base = gen_scenario_pdfs(o.n.unwrap_or(100), s, eta, rng)?;
    Ok(insert_outliers(&base, o.outliers, o.zeta_hs, o.varpi.unwrap_or(0.2), rng)?)
}

/// Per-node rates followed by the rates of their union.
fn tree_rates(pdfs: &[DensityFn], truth: &[usize], o: &Overrides) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut all = Vec::new();
    for cfg in tree_of(o) {
        let flagged = node_detect(pdfs, &cfg)?.flagged();
        out.extend(rates(&flagged, truth, pdfs.len()));
        all.extend(flagged);
    }
    out.extend(rates(&all, truth, pdfs.len()));
    Ok(out)
}

fn run_once(kind: ExperimentKind, row: usize, o: &Overrides, rng: &mut RandomStream) -> Result<Vec<f64>> {
    match kind {
        ExperimentKind::Table2 => {
            let (pdfs, truth) = scenario_sample(row, o, rng)?;
            tree_rates(&pdfs, &truth, o)
        }
        ExperimentKind::Table3 => {
            let (pdfs, truth) = scenario_sample(row, o, rng)?;
            let mut out = Vec::new();
            for &vo in &o.vo_whiskers {
                let rep = qf_fdo_detect(&pdfs, o.fdo_alpha, o.fdo_region, o.mo_whisker, vo)?;
                out.extend(rates(&rep.flagged(), &truth, pdfs.len()));
            }
            Ok(out)
        }
        ExperimentKind::Table4Phase => {
            let (pdfs, truth) = scenario_sample(row, o, rng)?;
            let rep = phase_detect(&pdfs, o.phase_alpha, o.phase_whisker)?;
            Ok(rates(&rep.flagged(), &truth, pdfs.len()).to_vec())
        }
        ExperimentKind::TableA5 => {
            let (pdfs, truth) = gen_sinusoid_dataset(o.n.unwrap_or(100), o.outliers, rng)?;
            tree_rates(&pdfs, &truth, o)
        }
        ExperimentKind::Table7 | ExperimentKind::TableA9 => {
            let n = o.n.unwrap_or(100);
            let (pairs, truth) = if kind == ExperimentKind::Table7 {
                let (mg, mf) = TABLE7_CELLS[row];
                exchange_contaminate(&gen_pairs(n, PairVariant::MixtureA5, rng)?, mg, mf, rng)?
            } else {
                let (ng, nf) = TABLEA9_CELLS[row];
                let base = gen_pairs(n, PairVariant::SimpleA9, rng)?;
                insert_contaminate(&base, ng, nf, o.zeta_hs, o.varpi.unwrap_or(0.25), rng)?
            };
            let rep = detect_regression_outliers(&pairs.g, &pairs.f, &o.regoutlier)?;
            Ok(rates(&rep.flagged, &truth, n).to_vec())
        }
        ExperimentKind::RobustRegression => robust_trial(o, rng).map(|t| t.to_vec()),
    }
}

/// One robust-versus-standard comparison: [robust IAE, standard IAE, win].
fn robust_trial(o: &Overrides, rng: &mut RandomStream) -> Result<[f64; 3]> {
    ensure!(o.train >= 8 && o.test >= 1, "need at least 8 training and 1 test pair");
    let all = gen_pairs(o.train + o.test, PairVariant::MixtureA5, rng)?;
    let train = all.subset(&(0..o.train).collect::<Vec<_>>());
    let test = all.subset(&(o.train..o.train + o.test).collect::<Vec<_>>());
    let (train, _) = exchange_contaminate(&train, o.exchange.0, o.exchange.1, rng)?;
    let (train, _) = insert_contaminate(&train, o.insert.0, o.insert.1, o.zeta_hs, o.varpi.unwrap_or(0.25), rng)?;

    let (w, _) = robust_weights(&train.g, &train.f, &tree_of(o), &o.regoutlier, o.rho1, o.rho2)?;
    let params = FitParams { lambda: o.lambda_s, alpha: o.lqd_alpha, m: o.m, k: None };
    let robust = fit(&train.g, &train.f, &w.w, &params)?;
    let standard = fit(&train.g, &train.f, &vec![1.0; o.train], &params)?;
    let iae = |model: &RegressionModel| -> Result<f64> {
        let errs = (0..o.test)
            .map(|i| Ok(l1_distance(model.predict(&test.g[i])?.curve(), test.f[i].curve())?))
            .collect::<Result<Vec<_>>>()?;
        Ok(median(&errs)?)
    };
    let (r, s) = (iae(&robust)?, iae(&standard)?);
    Ok([r, s, if r < s { 1.0 } else { 0.0 }])
}

fn task_stream(root: &RandomStream, row: usize, rep: usize) -> RandomStream {
    root.split(((row as u64) << 32) | rep as u64)
}

/// Runs the experiment and writes the CSV and manifest when the spec names
/// an output path.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    ensure!(spec.repetitions >= 1, "repetitions must be at least 1");
    let o = &spec.overrides;
    let plan = plan(spec.kind, o);
    let selected: Vec<usize> = match &o.rows {
        Some(rows) => {
            for &r in rows {
                ensure!(r < plan.rows.len(), "row {r} out of range for {} ({} rows)", spec.kind, plan.rows.len());
            }
            rows.clone()
        }
        None => (0..plan.rows.len()).collect(),
    };
    let root = RandomStream::new(spec.seed);
    let tasks: Vec<(usize, usize)> = selected
        .iter()
        .filter(|&&r| !plan.rows[r].blank)
        .flat_map(|&r| (0..spec.repetitions).map(move |k| (r, k)))
        .collect();
    let results: Vec<Result<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(row, rep)| {
            let mut rng = task_stream(&root, row, rep);
            run_once(spec.kind, row, o, &mut rng)
        })
        .collect();

    let width = plan.value_headers.len();
    let mut rows = Vec::new();
    for &r in &selected {
        let mut sums = vec![0.0; width];
        let (mut completed, mut failed) = (0, 0);
        for ((row, rep), res) in tasks.iter().zip(&results) {
            if *row != r {
                continue;
            }
            match res {
                Ok(v) => {
                    debug_assert_eq!(v.len(), width);
                    completed += 1;
                    sums.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                }
                Err(e) => {
                    failed += 1;
                    log::warn!("{} row {r} repetition {rep} failed: {e:#}", spec.kind);
                }
            }
        }
        let values = if completed == 0 {
            vec![None; width]
        } else {
            sums.into_iter().map(|s| Some(s / completed as f64)).collect()
        };
        rows.push(TableRow { index: r, labels: plan.rows[r].labels.clone(), values, completed, failed });
    }
    let table = ExperimentTable {
        spec: spec.clone(),
        label_headers: plan.label_headers,
        value_headers: plan.value_headers,
        rows,
    };
    if let Some(path) = &spec.output {
        table.save(path)?;
    }
    Ok(table)
}
