//! Ensemble statistics: pooled distances, six-number summaries and
//! clustering-coefficient histograms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

/// Collects the strictly-upper-triangle entries of every matrix, in order.
pub fn pool_distances(matrices: &[DistanceMatrix]) -> Result<Vec<f64>> {
    if let Some(first) = matrices.first() {
        if let Some(other) = matrices.iter().find(|m| m.measure() != first.measure()) {
            return Err(Error::MixedMeasures(
                first.measure().to_string(),
                other.measure().to_string(),
            ));
        }
    }
    Ok(matrices.iter().flat_map(|m| m.upper_triangle()).collect())
}

/// Min, quartiles, mean and max in the usual six-number layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl SummaryStats {
    pub const CSV_COLUMNS: &'static str = "Min.,1st Qu.,Median,Mean,3rd Qu.,Max.";

    pub fn as_array(&self) -> [f64; 6] {
        [self.min, self.q1, self.median, self.mean, self.q3, self.max]
    }

    pub fn csv_cells(&self) -> String {
        self.as_array()
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `h = (n - 1) p` (zero-based).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

pub fn summary(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::TooFew {
            what: "a summary",
            min: 1,
            got: 0,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(SummaryStats {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        // clamp rounding of the mean of a constant sample
        mean: mean.clamp(sorted[0], sorted[sorted.len() - 1]),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

pub fn median(values: &[f64]) -> Result<f64> {
    summary(values).map(|s| s.median)
}

/// Counts over uniform bins spanning `[0, 1]`. Bins are right-open except the
/// last, which also holds 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// `bin_left,bin_right,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{:.6},{:.6},{c}", self.edges[i], self.edges[i + 1])
                .expect("writing to a String");
        }
        out
    }
}

pub fn clustering_histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 1 {
        return Err(Error::InvalidParams(
            "histogram needs at least one bin".into(),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParams(format!("value {v} outside [0, 1]")));
    }
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let mut b = ((v * bins as f64) as usize).min(bins - 1);
        // settle floating-point rounding against the exact edges
        while b > 0 && v < edges[b] {
            b -= 1;
        }
        while b + 1 < bins && v >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram {
        edges,
        counts,
        total: values.len() as u64,
    })
}
