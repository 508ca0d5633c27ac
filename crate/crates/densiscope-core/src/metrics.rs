//! Correct and false detection rates.

/// Detection outcome against a known set of planted outliers.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    /// Percentage of planted outliers that were flagged; `None` when nothing
    /// was planted.
    pub p_c: Option<f64>,
    /// Percentage of clean curves that were flagged.
    pub p_f: f64,
    pub n_out: usize,
    pub n_norm: usize,
    pub n_correct: usize,
    pub n_false: usize,
}

/// Set arithmetic on index lists; duplicates and out-of-range indices are
/// ignored.
pub fn detection_metrics(flagged: &[usize], truth: &[usize], n: usize) -> Metrics {
    let mut is_true = alloc::vec![false; n];
    for &t in truth {
        if t < n {
            is_true[t] = true;
        }
    }
    let mut seen = alloc::vec![false; n];
    let (mut correct, mut false_hits) = (0, 0);
    for &i in flagged {
        if i >= n || seen[i] {
            continue;
        }
        seen[i] = true;
        if is_true[i] {
            correct += 1;
        } else {
            false_hits += 1;
        }
    }
    let n_out = is_true.iter().filter(|&&t| t).count();
    let n_norm = n - n_out;
    Metrics {
        p_c: (n_out > 0).then(|| 100.0 * correct as f64 / n_out as f64),
        p_f: if n_norm > 0 { 100.0 * false_hits as f64 / n_norm as f64 } else { 0.0 },
        n_out,
        n_norm,
        n_correct: correct,
        n_false: false_hits,
    }
}
