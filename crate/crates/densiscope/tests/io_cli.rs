use std::path::Path;
use std::process::Command;

use densiscope::config;
use densiscope::curves::CurveTable;
use densiscope::experiments::{run_experiment, ExperimentKind, ExperimentSpec};
use densiscope::model::ModelFile;
use densiscope::records::{detection_records, read_jsonl, write_jsonl, DetectionRecord, Manifest, MultiJson};
use densiscope_core::density::{l1_distance, GridCurve};
use densiscope_core::functional::{default_tree, tree_detect};
use densiscope_core::regoutlier::RegDetectParams;
use densiscope_core::regression::{fit, FitParams};
use densiscope_core::simgen::{gen_pairs, gen_scenario_pdfs, insert_outliers, PairVariant, RandomStream, Scenario};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_densiscope"));
    c.env_remove("DENSISCOPE_SEED");
    c
}

fn ok(c: &mut Command) -> String {
    let out = c.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn curve_csv_round_trips_exactly() {
    let mut rng = RandomStream::new(3);
    let pdfs = gen_scenario_pdfs(5, Scenario::II, 0.3, &mut rng).unwrap();
    let table = CurveTable::from_densities(&pdfs);
    let mut buf = Vec::new();
    table.to_writer(&mut buf).unwrap();
    let back = CurveTable::from_reader(buf.as_slice()).unwrap();
    assert_eq!(back, table);
    assert_eq!(back.ids[4], "c4");
    back.densities(false).unwrap();
}

#[test]
fn uneven_grid_rejected() {
    let text = "x,a\n0,1\n0.4,1\n1,1\n";
    assert!(CurveTable::from_reader(text.as_bytes()).is_err());
    let text = "x,a\n0,1\n0.5,oops\n1,1\n";
    assert!(CurveTable::from_reader(text.as_bytes()).is_err());
}

#[test]
fn non_density_columns_need_normalizing() {
    let text = "x,a\n0,2\n0.5,2\n1,2\n";
    let t = CurveTable::from_reader(text.as_bytes()).unwrap();
    assert!(t.densities(false).is_err());
    let f = t.densities(true).unwrap();
    assert!((f[0].values()[1] - 1.0).abs() < 1e-12);
}

#[test]
fn flat_and_json_configs_agree() {
    let flat: RegDetectParams = config::parse("theta_h = 0.2\niterations = 2\nlambda_grid = [0.1, 1.0]").unwrap();
    let json: RegDetectParams =
        config::parse(r#"{"theta_h": 0.2, "iterations": 2, "lambda_grid": [0.1, 1.0]}"#).unwrap();
    assert_eq!(flat, json);
    assert_eq!(flat.alpha_lqd, RegDetectParams::default().alpha_lqd);
}

#[test]
fn model_container_round_trips() {
    let mut rng = RandomStream::new(11);
    let pairs = gen_pairs(20, PairVariant::MixtureA5, &mut rng).unwrap();
    let model = fit(&pairs.g, &pairs.f, &[1.0; 20], &FitParams::new(0.1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    ModelFile::new(&model, Value::Null).unwrap().save(&path).unwrap();
    let back = ModelFile::load(&path).unwrap().to_model().unwrap();
    assert_eq!(back, model);
    let a = model.predict(&pairs.g[3]).unwrap();
    let b = back.predict(&pairs.g[3]).unwrap();
    assert_eq!(l1_distance(a.curve(), b.curve()).unwrap(), 0.0);
}

#[test]
fn tampered_model_rejected() {
    let mut rng = RandomStream::new(12);
    let pairs = gen_pairs(10, PairVariant::SimpleA9, &mut rng).unwrap();
    let model = fit(&pairs.g, &pairs.f, &[1.0; 10], &FitParams::new(0.1)).unwrap();
    let mut file = ModelFile::new(&model, Value::Null).unwrap();
    file.weights.pop();
    assert!(file.to_model().is_err());
    let mut file = ModelFile::new(&model, Value::Null).unwrap();
    file.version = 99;
    assert!(file.to_model().is_err());
}

#[test]
fn detection_records_round_trip() {
    let mut rng = RandomStream::new(5);
    let base = gen_scenario_pdfs(60, Scenario::I, 0.0, &mut rng).unwrap();
    let (pdfs, _) = insert_outliers(&base, 6, 0.0, 0.2, &mut rng).unwrap();
    let report = tree_detect(&pdfs, &default_tree()).unwrap();
    assert!(!report.is_empty());
    let records = detection_records(&report, None);
    assert_eq!(records.len(), report.hits.values().map(Vec::len).sum::<usize>());
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &records).unwrap();
    let back: Vec<DetectionRecord> = read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back, records);
}

#[test]
fn experiments_are_reproducible() {
    let mut spec = ExperimentSpec::new(ExperimentKind::Table2, 3, 42).rows(&[1, 6]);
    spec.overrides.n = Some(40);
    spec.overrides.outliers = 4;
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a, b);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    a.to_csv(&mut buf_a).unwrap();
    b.to_csv(&mut buf_b).unwrap();
    assert_eq!(buf_a, buf_b);
    // Selecting a subset of rows does not change their streams.
    let only = run_experiment(&spec.clone().rows(&[6])).unwrap();
    assert_eq!(only.rows[0], a.rows[1]);
    for r in &a.rows {
        assert!(r.values.iter().all(|v| (0.0..=100.0).contains(&v.unwrap())));
    }
}

#[test]
fn single_repetition_gives_raw_rates() {
    let mut spec = ExperimentSpec::new(ExperimentKind::Table3, 1, 8).rows(&[0]);
    spec.overrides.n = Some(50);
    spec.overrides.outliers = 5;
    let t = run_experiment(&spec).unwrap();
    // One repetition: p_c is a multiple of 100/5, p_f of 100/45.
    for (h, v) in t.value_headers.iter().zip(&t.rows[0].values) {
        let v = v.unwrap();
        let unit = if h.ends_with("p_c") { 20.0 } else { 100.0 / 45.0 };
        assert!(((v / unit) - (v / unit).round()).abs() < 1e-9, "{h} = {v}");
    }
}

#[test]
fn experiment_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::TableA5, 2, 1);
    spec.overrides.n = Some(40);
    spec.overrides.outliers = 4;
    spec.output = Some(dir.path().join("a5.csv"));
    run_experiment(&spec).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("a5.csv")).unwrap();
    assert!(csv.starts_with("Dataset,MED p_c,MED p_f,nLQD p_c"));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a5.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["kind"], "tableA5");
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn cli_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let arg = |p: &Path| p.to_str().unwrap().to_owned();

    ok(bin().args(["simulate", "--dataset", "scenario", "--n", "40", "--outliers", "4", "--out-dir", &arg(d)]).env("DENSISCOPE_SEED", "9"));
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 9);
    assert_eq!(manifest.outliers.len(), 4);
    let curves = d.join("curves.csv");
    assert_eq!(CurveTable::read(&curves).unwrap().len(), 40);

    let out = ok(bin().args(["detect", "--curves", &arg(&curves)]));
    let recs: Vec<DetectionRecord> = read_jsonl(out.as_bytes()).unwrap();
    assert!(recs.iter().all(|r| r.id.as_deref() == Some(format!("c{}", r.index).as_str())));

    let out = ok(bin().args(["detect", "--curves", &arg(&curves), "--method", "fdo", "--whisker", "2.0"]));
    let recs: Vec<DetectionRecord> = read_jsonl(out.as_bytes()).unwrap();
    assert!(recs.iter().all(|r| r.node.starts_with("FDO")));

    let grid = write(
        d,
        "grid.cfg",
        "fdo.alphas = [1e-10]\nfdo.regions = [[0.2, 0.8], [0.1, 0.9]]\nfdo.vo_whiskers = [1.5, 2.0]\nfdo.mo_whiskers = [1.5, 2.0]\n",
    );
    let out = ok(bin().args(["multidetect", "--curves", &arg(&curves), "--grid", &arg(&grid)]));
    let multi: MultiJson = serde_json::from_str(&out).unwrap();
    assert_eq!(multi.runs.len(), 8);
    assert!(multi.retained_ids.iter().all(|&i| multi.runs[i].count as f64 <= multi.fence));

    ok(bin().args(["simulate", "--dataset", "pairs-a5", "--n", "30", "--exchange", "0,2", "--out-dir", &arg(d)]));
    let (g, f) = (d.join("g.csv"), d.join("f.csv"));
    let params = write(d, "reg.cfg", "iterations = 2\n");
    let out = ok(bin().args(["regoutlier", "--pairs", &arg(&g), &arg(&f), "--params", &arg(&params)]));
    let report: Value = serde_json::from_str(&out).unwrap();
    assert!(report["iterations"].as_array().unwrap().len() <= 2);
    assert!(report["flagged"].is_array());

    let model = d.join("model.json");
    ok(bin().args(["regress", "fit", "--pred", &arg(&g), "--resp", &arg(&f), "--rho1", "1", "--out", &arg(&model)]));
    let pred = d.join("pred.csv");
    ok(bin().args(["regress", "predict", "--model", &arg(&model), "--pred", &arg(&g), "--out", &arg(&pred)]));
    let p = CurveTable::read(&pred).unwrap();
    assert_eq!(p.len(), 30);
    p.densities(false).unwrap();

    let out = ok(bin().args(["bench", "--kind", "table4_phase", "--repetitions", "1", "--rows", "0", "--seed", "3"]));
    assert!(out.starts_with("Scenario,Model,PHASE p_c,PHASE p_f"));
}

#[test]
fn cli_failure_emits_error_record() {
    let out = bin().args(["detect", "--curves", "/nonexistent/curves.csv"]).output().unwrap();
    assert!(!out.status.success());
    let rec: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert!(rec["error"].as_str().unwrap().contains("/nonexistent/curves.csv"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "c.csv", "x,a\n0,1\n0.5,1\n1,1\n");
    let cfg = write(dir.path(), "n.cfg", "node = med\nwhisker = 2.0\n");
    let out = bin().args(["detect", "--curves", bad.to_str().unwrap(), "--method", "clr", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let rec: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert!(rec["error"].as_str().unwrap().contains("MED"));
}

#[test]
fn grid_curve_helpers_used_by_io() {
    let c = GridCurve::new(0.0, 2.0, vec![0.5; 5]).unwrap();
    let t = CurveTable::from_curves(vec![c]);
    let mut buf = Vec::new();
    t.to_writer(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("x,c0\n0,0.5\n0.5,0.5\n"));
}
