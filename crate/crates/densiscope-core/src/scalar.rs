//! Robust scalar summaries and the boxplot fences used by every detector.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// MAD consistency constant for Gaussian data.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Side {
    TwoSided,
    OneSidedUpper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxplotParams {
    pub whisker: f64,
    pub side: Side,
}

impl BoxplotParams {
    pub fn two_sided(whisker: f64) -> Self {
        Self { whisker, side: Side::TwoSided }
    }

    pub fn one_sided(whisker: f64) -> Self {
        Self { whisker, side: Side::OneSidedUpper }
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn percentile_sorted(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    if lo + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[lo] + (h - lo as f64) * (s[lo + 1] - s[lo])
}

/// Order-statistic quantile with linear interpolation at `h = (n - 1) p`.
pub fn percentile(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::TooFew { need: 1, got: 0 });
    }
    Ok(percentile_sorted(&sorted(xs), p))
}

pub fn median(xs: &[f64]) -> Result<f64> {
    percentile(xs, 0.5)
}

/// Scaled median absolute deviation.
pub fn mad(xs: &[f64]) -> Result<f64> {
    let m = median(xs)?;
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    Ok(MAD_SCALE * median(&dev)?)
}

/// Quartiles and the fences they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fences {
    pub q25: f64,
    pub q75: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Fences {
    pub fn new(xs: &[f64], whisker: f64) -> Result<Self> {
        let s = sorted(xs);
        if s.is_empty() {
            return Err(Error::TooFew { need: 1, got: 0 });
        }
        let q25 = percentile_sorted(&s, 0.25);
        let q75 = percentile_sorted(&s, 0.75);
        let iqr = q75 - q25;
        Ok(Self { q25, q75, lower: q25 - whisker * iqr, upper: q75 + whisker * iqr })
    }

    // Values must clear a fence by this margin, so ties and rounding noise
    // around a zero-width box never count as outliers.
    fn slack(&self) -> f64 {
        1e-12 * self.q75.abs().max(self.q25.abs()).max(1.0)
    }

    pub fn above(&self, x: f64) -> bool {
        x > self.upper + self.slack()
    }

    pub fn below(&self, x: f64) -> bool {
        x < self.lower - self.slack()
    }
}

/// Indices strictly beyond the boxplot fence(s). Fewer than four values
/// yields an empty set.
pub fn boxplot_detect(xs: &[f64], params: BoxplotParams) -> Vec<usize> {
    if xs.len() < 4 {
        log::warn!("boxplot on {} values: quartiles unstable, nothing flagged", xs.len());
        return Vec::new();
    }
    let f = Fences::new(xs, params.whisker).expect("nonempty");
    xs.iter()
        .enumerate()
        .filter(|&(_, &x)| match params.side {
            Side::TwoSided => f.above(x) || f.below(x),
            Side::OneSidedUpper => f.above(x),
        })
        .map(|(i, _)| i)
        .collect()
}
