//! Serialized detection outputs and simulation manifests.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use anyhow::Result;
use densiscope_core::functional::{DetectionReport, DistanceKind, Method};
use densiscope_core::multi::{MultiOutcome, RunRecord, Severity};
use serde::{Deserialize, Serialize};

/// One line of a detection record stream: a flagged curve and the check
/// that flagged it. A curve flagged by several checks gets several lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<String>,
    pub node: String,
    pub distance: Option<DistanceKind>,
    pub region: Option<(f64, f64)>,
    pub score: f64,
}

fn method_name(m: Method) -> String {
    match m {
        Method::Node(k) => k.name().to_owned(),
        Method::FdoMo => "FDO-MO".to_owned(),
        Method::FdoVo => "FDO-VO".to_owned(),
        Method::Phase => "PHASE".to_owned(),
    }
}

pub fn detection_records(report: &DetectionReport, ids: Option<&[String]>) -> Vec<DetectionRecord> {
    report
        .hits
        .iter()
        .flat_map(|(&index, why)| {
            why.iter().map(move |p| DetectionRecord {
                index,
                id: ids.and_then(|ids| ids.get(index).cloned()),
                node: method_name(p.method),
                distance: p.distance,
                region: p.region,
                score: p.score,
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> Result<()> {
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Multiple-detection output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiJson {
    pub runs: Vec<RunRecord>,
    pub retained_ids: Vec<usize>,
    pub unstable_ids: Vec<usize>,
    pub failed_ids: Vec<usize>,
    pub fence: f64,
    pub frequencies: BTreeMap<usize, usize>,
    pub severity: BTreeMap<usize, Severity>,
}

impl From<MultiOutcome> for MultiJson {
    fn from(o: MultiOutcome) -> Self {
        Self {
            runs: o.runs,
            retained_ids: o.report.retained_ids,
            unstable_ids: o.filter.unstable,
            failed_ids: o.filter.failed,
            fence: o.filter.fence,
            frequencies: o.report.frequencies.into_iter().collect(),
            severity: o.report.severity.into_iter().collect(),
        }
    }
}

/// Written next to simulated curve files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub dataset: String,
    pub params: serde_json::Value,
    /// Planted outlier positions, sorted.
    pub outliers: Vec<usize>,
    pub files: Vec<String>,
}

/// Machine-readable failure record printed by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub error: String,
    pub causes: Vec<String>,
}

impl ErrorRecord {
    pub fn from_anyhow(e: &anyhow::Error) -> Self {
        Self { error: e.to_string(), causes: e.chain().skip(1).map(|c| c.to_string()).collect() }
    }
}
