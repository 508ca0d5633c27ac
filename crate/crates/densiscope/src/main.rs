use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use densiscope::curves::CurveTable;
use densiscope::experiments::{run_experiment, ExperimentKind, ExperimentSpec};
use densiscope::model::ModelFile;
use densiscope::records::{detection_records, write_jsonl, ErrorRecord, Manifest, MultiJson};
use densiscope::{config, core};
use core::density::DensityFn;
use core::functional::{
    default_tree, phase_detect, qf_fdo_detect, tree_detect, Check, DetectionReport, DistanceKind, NodeConfig, NodeKind,
};
use core::multi::{multi_detect, ParamGrid, DEFAULT_BREAKS};
use core::regoutlier::{detect_regression_outliers, robust_weights, RegDetectParams};
use core::regression::{default_lambda_grid, fit, gcv_select, FitParams};
use core::simgen::{
    exchange_contaminate, gen_beta_sorted, gen_pairs, gen_scenario_pdfs, gen_sinusoid_dataset, insert_contaminate,
    insert_outliers, PairVariant, RandomStream, Scenario, MODEL_ETA,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "densiscope", version, about = "Outlier detection and robust regression for density-valued data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a density sample (or pair sample) with planted outliers.
    Simulate(SimulateArgs),
    /// Run a single-sample detector on a curve file.
    Detect(DetectArgs),
    /// Run a parameter grid of detectors and consolidate the stable runs.
    Multidetect(MultiArgs),
    /// Fit or apply a distribution-to-distribution regression model.
    Regress {
        #[command(subcommand)]
        action: RegressAction,
    },
    /// Detect abnormal associations between paired densities.
    Regoutlier(RegOutlierArgs),
    /// Run a benchmark table experiment.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Scenario,
    BetaSorted,
    Sinusoid,
    PairsA5,
    PairsA9,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    dataset: Dataset,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Scenario of the beta/tGPD mixtures: 1 or 2.
    #[arg(long, default_value_t = 1)]
    scenario: u8,
    /// Model 1 to 4 (mixing weight 0, 0.15, 0.30, 0.45).
    #[arg(long, default_value_t = 1)]
    model: usize,
    #[arg(long, default_value_t = 36.0)]
    delta1: f64,
    #[arg(long, default_value_t = 63.0)]
    delta2: f64,
    /// Planted outliers (single-sample datasets).
    #[arg(long, default_value_t = 10)]
    outliers: usize,
    #[arg(long, default_value_t = 0.0)]
    zeta_hs: f64,
    #[arg(long, default_value_t = 0.2)]
    varpi: f64,
    /// Exchanged predictors and responses, `M_g,M_f` (pair datasets).
    #[arg(long, value_parser = parse_pair::<usize>)]
    exchange: Option<(usize, usize)>,
    /// Inserted predictor and response outliers, `N_g,N_f` (pair datasets).
    #[arg(long, value_parser = parse_pair::<usize>)]
    insert: Option<(usize, usize)>,
    #[arg(long, env = "DENSISCOPE_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectMethod {
    Tree,
    Med,
    Nlqd,
    Clr,
    Diff,
    Fdo,
    Phase,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    curves: PathBuf,
    #[arg(long, value_enum, default_value = "tree")]
    method: DetectMethod,
    /// Node list (tree) or single node configuration replacing the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Uniform mixing: LQD/CLR/QF α, or the phase mixing α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Whisker of MED, CLR, the FDO VO screen or the phase screen.
    #[arg(long)]
    whisker: Option<f64>,
    /// FDO MO whisker.
    #[arg(long, default_value_t = 1.5)]
    mo_whisker: f64,
    /// L1 whisker of nLQD/DIFF.
    #[arg(long)]
    l1_whisker: Option<f64>,
    /// L∞ whisker of nLQD/DIFF.
    #[arg(long)]
    linf_whisker: Option<f64>,
    /// Detection region `a,b`; repeat for several nLQD regions.
    #[arg(long, value_parser = parse_pair::<f64>)]
    region: Vec<(f64, f64)>,
    /// Rescale every column to unit mass before validating.
    #[arg(long)]
    normalize: bool,
    /// JSON-lines output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MultiArgs {
    #[arg(long)]
    curves: PathBuf,
    /// Parameter grid file; the built-in 279-run grid when absent.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Whisker of the unstable-run filter.
    #[arg(long, default_value_t = 2.5)]
    whisker: f64,
    #[arg(long, default_value_t = DEFAULT_BREAKS.0)]
    mild: f64,
    #[arg(long, default_value_t = DEFAULT_BREAKS.1)]
    heavy: f64,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RegressAction {
    Fit(FitArgs),
    Predict(PredictArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Predictor densities.
    #[arg(long)]
    pred: PathBuf,
    /// Response densities, column-aligned with the predictors.
    #[arg(long)]
    resp: PathBuf,
    /// Regularization; chosen by GCV when absent.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Enables the robust weights with this single-sample decay rate.
    #[arg(long)]
    rho1: Option<f64>,
    /// Association decay rate of the robust weights.
    #[arg(long)]
    rho2: Option<f64>,
    /// Regression-outlier parameters for the robust weights.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegOutlierArgs {
    /// Predictor and response curve files.
    #[arg(long, num_args = 2, value_names = ["G_CSV", "F_CSV"])]
    pairs: Vec<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec file; the flags below are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(String))]
    kind: Option<String>,
    #[arg(long, default_value_t = 100)]
    repetitions: usize,
    #[arg(long, env = "DENSISCOPE_SEED", default_value_t = 1)]
    seed: u64,
    /// Row indices to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    rows: Vec<usize>,
    /// CSV destination (the manifest goes next to it).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; rayon's default when absent.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<T>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_densities(path: &Path, normalize: bool) -> Result<(CurveTable, Vec<DensityFn>)> {
    let table = CurveTable::read(path)?;
    let pdfs = table.densities(normalize).with_context(|| format!("in {}", path.display()))?;
    Ok((table, pdfs))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut rng = RandomStream::new(a.seed);
    let scenario = match a.scenario {
        1 => Scenario::I,
        2 => Scenario::II,
        s => bail!("scenario must be 1 or 2, got {s}"),
    };
    if !(1..=4).contains(&a.model) {
        bail!("model must be 1 to 4, got {}", a.model);
    }
    let mut files = Vec::new();
    let (name, params, outliers) = match a.dataset {
        Dataset::Scenario | Dataset::BetaSorted | Dataset::Sinusoid => {
            let (pdfs, truth, name, params) = match a.dataset {
                Dataset::Scenario => {
                    let eta = MODEL_ETA[a.model - 1];
                    let base = gen_scenario_pdfs(a.n, scenario, eta, &mut rng)?;
                    let (pdfs, truth) = insert_outliers(&base, a.outliers, a.zeta_hs, a.varpi, &mut rng)?;
                    let params = json!({"n": a.n, "scenario": scenario, "eta": eta, "outliers": a.outliers,
                        "zeta_hs": a.zeta_hs, "varpi": a.varpi});
                    (pdfs, truth, "scenario", params)
                }
                Dataset::BetaSorted => {
                    let base = gen_beta_sorted(a.n, a.delta1, a.delta2, &mut rng)?;
                    let (pdfs, truth) = insert_outliers(&base, a.outliers, a.zeta_hs, a.varpi, &mut rng)?;
                    let params = json!({"n": a.n, "delta1": a.delta1, "delta2": a.delta2, "outliers": a.outliers,
                        "zeta_hs": a.zeta_hs, "varpi": a.varpi});
                    (pdfs, truth, "beta_sorted", params)
                }
                _ => {
                    let (pdfs, truth) = gen_sinusoid_dataset(a.n, a.outliers, &mut rng)?;
                    (pdfs, truth, "sinusoid", json!({"n": a.n, "outliers": a.outliers}))
                }
            };
            CurveTable::from_densities(&pdfs).write(&a.out_dir.join("curves.csv"))?;
            files.push("curves.csv".to_owned());
            (name, params, truth)
        }
        Dataset::PairsA5 | Dataset::PairsA9 => {
            let (variant, name) = match a.dataset {
                Dataset::PairsA5 => (PairVariant::MixtureA5, "pairs_a5"),
                _ => (PairVariant::SimpleA9, "pairs_a9"),
            };
            let mut pairs = gen_pairs(a.n, variant, &mut rng)?;
            let mut truth = Vec::new();
            if let Some((mg, mf)) = a.exchange {
                let (p, t) = exchange_contaminate(&pairs, mg, mf, &mut rng)?;
                pairs = p;
                truth.extend(t);
            }
            if let Some((ng, nf)) = a.insert {
                let (p, t) = insert_contaminate(&pairs, ng, nf, a.zeta_hs, a.varpi, &mut rng)?;
                pairs = p;
                truth.extend(t);
            }
            truth.sort_unstable();
            truth.dedup();
            CurveTable::from_densities(&pairs.g).write(&a.out_dir.join("g.csv"))?;
            CurveTable::from_densities(&pairs.f).write(&a.out_dir.join("f.csv"))?;
            files.extend(["g.csv".to_owned(), "f.csv".to_owned()]);
            let params = json!({"n": a.n, "variant": variant, "exchange": a.exchange, "insert": a.insert,
                "zeta_hs": a.zeta_hs, "varpi": a.varpi});
            (name, params, truth)
        }
    };
    let manifest = Manifest { seed: a.seed, dataset: name.to_owned(), params, outliers, files };
    write_json(Some(&a.out_dir.join("manifest.json")), &manifest)
}

/// Default node of `kind` with the CLI flags applied.
fn node_from_flags(kind: NodeKind, a: &DetectArgs) -> NodeConfig {
    let mut cfg = NodeConfig::default_for(kind);
    let set_checks = |checks: &mut Vec<Check>| {
        for c in checks.iter_mut() {
            match c.distance {
                DistanceKind::L1 => c.whisker = a.l1_whisker.unwrap_or(c.whisker),
                DistanceKind::Linf => c.whisker = a.linf_whisker.unwrap_or(c.whisker),
                DistanceKind::L2 => {}
            }
        }
    };
    match &mut cfg {
        NodeConfig::Med { whisker } => *whisker = a.whisker.unwrap_or(*whisker),
        NodeConfig::Nlqd { alpha, checks, regions } => {
            *alpha = a.alpha.unwrap_or(*alpha);
            set_checks(checks);
            if !a.region.is_empty() {
                *regions = a.region.clone();
            }
        }
        NodeConfig::Clr { alpha, whisker, .. } => {
            *alpha = a.alpha.unwrap_or(*alpha);
            *whisker = a.whisker.unwrap_or(*whisker);
        }
        NodeConfig::Diff { checks, region } => {
            set_checks(checks);
            if let Some(r) = a.region.first() {
                *region = *r;
            }
        }
    }
    cfg
}

fn detect(a: DetectArgs) -> Result<()> {
    let (table, pdfs) = read_densities(&a.curves, a.normalize)?;
    let single = |kind: NodeKind| -> Result<Vec<NodeConfig>> {
        match &a.config {
            Some(p) => {
                let cfg: NodeConfig = config::load(p)?;
                if cfg.kind() != kind {
                    bail!("configuration is for node {}, not {}", cfg.kind().name(), kind.name());
                }
                Ok(vec![cfg])
            }
            None => Ok(vec![node_from_flags(kind, &a)]),
        }
    };
    let report: DetectionReport = match a.method {
        DetectMethod::Tree => {
            let nodes = match &a.config {
                Some(p) => config::load(p)?,
                None => default_tree(),
            };
            tree_detect(&pdfs, &nodes)?
        }
        DetectMethod::Med => tree_detect(&pdfs, &single(NodeKind::Med)?)?,
        DetectMethod::Nlqd => tree_detect(&pdfs, &single(NodeKind::Nlqd)?)?,
        DetectMethod::Clr => tree_detect(&pdfs, &single(NodeKind::Clr)?)?,
        DetectMethod::Diff => tree_detect(&pdfs, &single(NodeKind::Diff)?)?,
        DetectMethod::Fdo => {
            let region = a.region.first().copied().unwrap_or((0.2, 0.8));
            qf_fdo_detect(&pdfs, a.alpha.unwrap_or(1e-10), region, a.mo_whisker, a.whisker.unwrap_or(1.5))?
        }
        DetectMethod::Phase => phase_detect(&pdfs, a.alpha.unwrap_or(0.1), a.whisker.unwrap_or(2.0))?,
    };
    let records = detection_records(&report, Some(&table.ids));
    write_jsonl(sink(a.out.as_deref())?, &records)
}

fn multidetect(a: MultiArgs) -> Result<()> {
    let (_, pdfs) = read_densities(&a.curves, a.normalize)?;
    let grid: ParamGrid = match &a.grid {
        Some(p) => config::load(p)?,
        None => ParamGrid::default(),
    };
    let outcome = multi_detect(&pdfs, &grid, a.whisker, (a.mild, a.heavy))?;
    write_json(a.out.as_deref(), &MultiJson::from(outcome))
}

fn regress_fit(a: FitArgs) -> Result<()> {
    let (_, g) = read_densities(&a.pred, a.normalize)?;
    let (_, f) = read_densities(&a.resp, a.normalize)?;
    if g.len() != f.len() {
        bail!("{} predictors but {} responses", g.len(), f.len());
    }
    let lambda = match a.lambda {
        Some(l) => l,
        None => gcv_select(&g, &f, a.alpha, a.m, &default_lambda_grid())?,
    };
    let params = FitParams { lambda, alpha: a.alpha, m: a.m, k: None };
    let robust = a.rho1.is_some() || a.rho2.is_some();
    let (weights, flagged) = if robust {
        let det: RegDetectParams = match &a.params {
            Some(p) => config::load(p)?,
            None => RegDetectParams::default(),
        };
        let (w, rep) = robust_weights(&g, &f, &default_tree(), &det, a.rho1.unwrap_or(1.0), a.rho2.unwrap_or(1.0))?;
        (w.w, rep.flagged)
    } else {
        (vec![1.0; g.len()], Vec::new())
    };
    let model = fit(&g, &f, &weights, &params)?;
    let notes = json!({"robust": robust, "rho1": a.rho1, "rho2": a.rho2, "association_flags": flagged,
        "pred": a.pred, "resp": a.resp});
    ModelFile::new(&model, notes)?.save(&a.out)?;
    log::info!("model written to {} (lambda = {lambda})", a.out.display());
    Ok(())
}

fn regress_predict(a: PredictArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?.to_model()?;
    let (table, g) = read_densities(&a.pred, a.normalize)?;
    let preds = g.iter().map(|g0| model.predict(g0)).collect::<Result<Vec<_>, _>>()?;
    let out = CurveTable { ids: table.ids, curves: preds.into_iter().map(DensityFn::into_curve).collect() };
    out.write(&a.out)
}

fn regoutlier(a: RegOutlierArgs) -> Result<()> {
    let [gp, fp] = <[PathBuf; 2]>::try_from(a.pairs).map_err(|_| anyhow::anyhow!("--pairs takes two files"))?;
    let (_, g) = read_densities(&gp, a.normalize)?;
    let (_, f) = read_densities(&fp, a.normalize)?;
    let params: RegDetectParams = match &a.params {
        Some(p) => config::load(p)?,
        None => RegDetectParams::default(),
    };
    let report = detect_regression_outliers(&g, &f, &params)?;
    write_json(a.out.as_deref(), &report)
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut spec: ExperimentSpec = match (&a.spec, &a.kind) {
        (Some(p), _) => config::load(p)?,
        (None, Some(k)) => ExperimentSpec::new(k.parse::<ExperimentKind>()?, a.repetitions, a.seed),
        (None, None) => bail!("give --spec or --kind"),
    };
    if a.spec.is_none() && !a.rows.is_empty() {
        spec.overrides.rows = Some(a.rows.clone());
    }
    if a.out.is_some() {
        spec.output = a.out.clone();
    }
    let run = || run_experiment(&spec);
    let table = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(run)?,
        None => run()?,
    };
    if table.failures() > 0 {
        log::warn!("{} repetition(s) failed", table.failures());
    }
    if spec.output.is_none() {
        table.to_csv(io::stdout().lock())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Detect(a) => detect(a),
        Command::Multidetect(a) => multidetect(a),
        Command::Regress { action: RegressAction::Fit(a) } => regress_fit(a),
        Command::Regress { action: RegressAction::Predict(a) } => regress_predict(a),
        Command::Regoutlier(a) => regoutlier(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = ErrorRecord::from_anyhow(&e);
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| format!("{{\"error\": {:?}}}", e.to_string())));
            ExitCode::FAILURE
        }
    }
}
