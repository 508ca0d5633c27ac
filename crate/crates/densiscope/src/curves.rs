//! Curve tables: the first CSV column holds the grid abscissas, each further
//! column one curve, and the header row the curve identifiers.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use densiscope_core::density::{DensityFn, GridCurve};

/// Relative tolerance on the spacing of the grid column.
const SPACING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub ids: Vec<String>,
    pub curves: Vec<GridCurve>,
}

impl CurveTable {
    /// Identifiers `c0, c1, …`.
    pub fn from_curves(curves: Vec<GridCurve>) -> Self {
        let ids = (0..curves.len()).map(|i| format!("c{i}")).collect();
        Self { ids, curves }
    }

    pub fn from_densities(pdfs: &[DensityFn]) -> Self {
        Self::from_curves(pdfs.iter().map(|f| f.curve().clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Validates every column as a density; with `normalize` the columns are
    /// rescaled to unit mass first.
    pub fn densities(&self, normalize: bool) -> Result<Vec<DensityFn>> {
        self.curves
            .iter()
            .zip(&self.ids)
            .map(|(c, id)| {
                let f = if normalize { DensityFn::normalized(c.clone()) } else { DensityFn::new(c.clone()) };
                f.with_context(|| format!("curve `{id}`"))
            })
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::from_reader(file).with_context(|| format!("reading {}", path.display()))
    }

    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            bail!("expected a grid column and at least one curve column");
        }
        let ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut xs = Vec::new();
        let mut cols = vec![Vec::new(); ids.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut fields = rec.iter().map(|s| s.parse::<f64>());
            let x = fields.next().context("empty row")?.with_context(|| format!("row {}", line + 2))?;
            xs.push(x);
            for (col, v) in cols.iter_mut().zip(fields) {
                col.push(v.with_context(|| format!("row {}", line + 2))?);
            }
        }
        if xs.len() < 2 {
            bail!("need at least two grid points, got {}", xs.len());
        }
        let (start, end) = (xs[0], xs[xs.len() - 1]);
        let h = (end - start) / (xs.len() - 1) as f64;
        for (i, &x) in xs.iter().enumerate() {
            if ((start + i as f64 * h) - x).abs() > SPACING_TOL * (end - start).abs().max(1.0) {
                bail!("grid column is not equally spaced at row {}", i + 2);
            }
        }
        let curves = cols.into_iter().map(|v| GridCurve::new(start, end, v)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { ids, curves })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.to_writer(file)
    }

    pub fn to_writer(&self, w: impl Write) -> Result<()> {
        let first = self.curves.first().context("no curves to write")?;
        if self.ids.len() != self.curves.len() {
            bail!("{} identifiers for {} curves", self.ids.len(), self.curves.len());
        }
        if self.curves.iter().any(|c| !c.same_grid(first)) {
            bail!("curves live on different grids");
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(std::iter::once("x").chain(self.ids.iter().map(String::as_str)))?;
        let mut row = Vec::with_capacity(self.curves.len() + 1);
        for i in 0..first.len() {
            row.clear();
            row.push(first.x(i).to_string());
            row.extend(self.curves.iter().map(|c| c.values()[i].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
