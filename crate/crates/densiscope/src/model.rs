//! JSON container for fitted regression models.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use densiscope_core::density::GridCurve;
use densiscope_core::nalgebra::DMatrix;
use densiscope_core::regression::{FpcaBasis, RegressionModel};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "densiscope-model";
pub const VERSION: u32 = 1;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for Matrix {
    fn from(m: &DMatrix<f64>) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }
    }
}

impl TryFrom<&Matrix> for DMatrix<f64> {
    type Error = anyhow::Error;

    fn try_from(m: &Matrix) -> Result<Self> {
        ensure!(m.data.len() == m.rows * m.cols, "matrix data has {} entries, expected {}×{}", m.data.len(), m.rows, m.cols);
        Ok(DMatrix::from_column_slice(m.rows, m.cols, &m.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub grid: GridMeta,
    pub sigma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub weights: Vec<f64>,
    /// Predictor LQD curves, one value vector per training pair.
    pub train_psi: Vec<Vec<f64>>,
    pub coef: Matrix,
    pub gram_k: Matrix,
    pub kernel: Matrix,
    pub scores: Matrix,
    pub basis: FpcaBasis,
    /// Free-form fit settings (ρ₁, ρ₂, training file names, …).
    #[serde(default)]
    pub notes: serde_json::Value,
}

impl ModelFile {
    pub fn new(m: &RegressionModel, notes: serde_json::Value) -> Result<Self> {
        let first = m.train_psi.first().context("model has no training curves")?;
        Ok(Self {
            format: FORMAT.to_owned(),
            version: VERSION,
            grid: GridMeta { start: first.start(), end: first.end(), points: first.len() },
            sigma: m.sigma,
            lambda: m.lambda,
            alpha: m.alpha,
            weights: m.weights.clone(),
            train_psi: m.train_psi.iter().map(|c| c.values().to_vec()).collect(),
            coef: (&m.coef).into(),
            gram_k: (&m.gram_k).into(),
            kernel: (&m.kernel).into(),
            scores: (&m.scores).into(),
            basis: m.basis.clone(),
            notes,
        })
    }

    pub fn to_model(&self) -> Result<RegressionModel> {
        if self.format != FORMAT || self.version != VERSION {
            bail!("unsupported model container {} v{}", self.format, self.version);
        }
        let GridMeta { start, end, points } = self.grid;
        let train_psi = self
            .train_psi
            .iter()
            .map(|v| {
                ensure!(v.len() == points, "training curve has {} points, grid has {points}", v.len());
                Ok(GridCurve::new(start, end, v.clone())?)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = train_psi.len();
        let coef: DMatrix<f64> = (&self.coef).try_into()?;
        let kernel: DMatrix<f64> = (&self.kernel).try_into()?;
        let m = self.basis.order();
        ensure!(coef.shape() == (n, m), "coefficient matrix is {:?}, expected ({n}, {m})", coef.shape());
        ensure!(kernel.shape() == (n, n), "kernel matrix is {:?}, expected ({n}, {n})", kernel.shape());
        ensure!(self.weights.len() == n, "{} weights for {n} training pairs", self.weights.len());
        Ok(RegressionModel {
            train_psi,
            coef,
            gram_k: (&self.gram_k).try_into()?,
            kernel,
            sigma: self.sigma,
            lambda: self.lambda,
            weights: self.weights.clone(),
            alpha: self.alpha,
            basis: self.basis.clone(),
            scores: (&self.scores).try_into()?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}
