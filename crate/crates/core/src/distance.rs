//! Attractor distances (min-Hamming, Euclidean and pseudo-Hamming) and
//! distance-matrix assembly.
//!
//! Activation vectors hold exact reduced fractions so that pseudo-Hamming
//! equality does not depend on attractor period: 1/2 from a 2-cycle equals
//! 2/4 from a 4-cycle.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{Attractor, AttractorSet};
use crate::error::{Error, Result};
use crate::network::NetworkState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    MinHamming,
    Euclidean,
    PseudoHamming,
}

impl Measure {
    pub const ALL: [Measure; 3] = [
        Measure::MinHamming,
        Measure::Euclidean,
        Measure::PseudoHamming,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::MinHamming => "min-hamming",
            Measure::Euclidean => "euclidean",
            Measure::PseudoHamming => "pseudo-hamming",
        }
    }

    /// Whether every value of this measure is an integer.
    pub fn is_integral(self) -> bool {
        !matches!(self, Measure::Euclidean)
    }

    /// Text form used in every CSV export: integers for integral measures,
    /// six decimals otherwise.
    pub fn format_value(self, v: f64) -> String {
        if self.is_integral() {
            format!("{}", v as i64)
        } else {
            format!("{v:.6}")
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown measure `{s}`")))
    }
}

pub fn hamming(a: &NetworkState, b: &NetworkState) -> Result<u32> {
    a.hamming(b)
}

fn check_same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Smallest Hamming distance between any state of `a` and any state of `b`.
pub fn min_hamming(a: &Attractor, b: &Attractor) -> Result<u32> {
    check_same_n(a.n(), b.n())?;
    if a.first() == b.first() {
        return Ok(0);
    }
    // Distinct attractors share no state, so 1 is the floor.
    let mut best = u32::MAX;
    for s in a.states() {
        for t in b.states() {
            let d = s.hamming_unchecked(t);
            if d < best {
                best = d;
                if best <= 1 {
                    return Ok(best);
                }
            }
        }
    }
    Ok(best)
}

/// A reduced fraction `num/den` with `den >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let g = num.gcd(&den);
        Fraction {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Per-node fraction of attractor states in which the node is 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActivationVector {
    entries: Vec<Fraction>,
}

impl ActivationVector {
    pub fn from_fractions(entries: Vec<Fraction>) -> Self {
        ActivationVector { entries }
    }

    pub fn entries(&self) -> &[Fraction] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn activation_vector(a: &Attractor) -> ActivationVector {
    let tau = a.period() as u64;
    let mut counts = vec![0u64; a.n()];
    for s in a.states() {
        for (j, c) in counts.iter_mut().enumerate() {
            *c += s.get(j) as u64;
        }
    }
    ActivationVector {
        entries: counts.into_iter().map(|c| Fraction::new(c, tau)).collect(),
    }
}

pub fn euclidean(v: &ActivationVector, w: &ActivationVector) -> Result<f64> {
    check_same_n(v.len(), w.len())?;
    let sum: f64 = v
        .entries
        .iter()
        .zip(&w.entries)
        .map(|(a, b)| {
            // exact difference, converted once
            let num = a.num as i128 * b.den as i128 - b.num as i128 * a.den as i128;
            let d = num as f64 / (a.den as i128 * b.den as i128) as f64;
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

pub fn pseudo_hamming(v: &ActivationVector, w: &ActivationVector) -> Result<u32> {
    check_same_n(v.len(), w.len())?;
    Ok(v.entries
        .iter()
        .zip(&w.entries)
        .filter(|(a, b)| a != b)
        .count() as u32)
}

/// A symmetric, zero-diagonal matrix of attractor distances under one measure.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    measure: Measure,
    labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// `values` is row-major `N x N`.
    pub fn new(measure: Measure, labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidParams(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "invalid distance {v} at ({i}, {j})"
                    )));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidParams(format!(
                        "asymmetric entry at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(DistanceMatrix {
            measure,
            labels,
            values,
        })
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| self.get(i, j)))
    }

    /// CSV with the measure name in the corner cell and attractor labels
    /// heading rows and columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 4);
        out.push_str(self.measure.name());
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.len() {
                out.push(',');
                out.push_str(&self.measure.format_value(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "header", "empty distance matrix file"))?;
        let mut cells = header.split(',');
        let measure: Measure = cells
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e: Error| Error::parse(1, "measure", e.to_string()))?;
        let labels: Vec<String> = cells.map(|c| c.trim().to_string()).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (i, line) in lines {
            let line_no = i + 1;
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or_default().trim();
            if rows >= n || label != labels[rows] {
                return Err(Error::parse(
                    line_no,
                    "label",
                    format!("unexpected row label `{label}`"),
                ));
            }
            let row = cells
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| {
                        Error::parse(line_no, "value", format!("invalid number `{c}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n {
                return Err(Error::parse(
                    line_no,
                    "value",
                    format!("expected {n} values, found {}", row.len()),
                ));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(Error::parse(
                text.lines().count() + 1,
                "label",
                format!("expected {n} rows, found {rows}"),
            ));
        }
        DistanceMatrix::new(measure, labels, values)
            .map_err(|e| Error::parse(0, "matrix", e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// All pairwise distances between the attractors of `set`, labelled in set
/// order. An empty set yields a `0 x 0` matrix.
pub fn distance_matrix(set: &AttractorSet, measure: Measure) -> DistanceMatrix {
    let attractors = set.attractors();
    let n = attractors.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();

    let dists: Vec<f64> = match measure {
        Measure::MinHamming => pairs
            .par_iter()
            .map(|&(i, j)| min_hamming(&attractors[i], &attractors[j]).expect("one network") as f64)
            .collect(),
        Measure::Euclidean | Measure::PseudoHamming => {
            let vectors: Vec<ActivationVector> =
                attractors.par_iter().map(activation_vector).collect();
            pairs
                .par_iter()
                .map(|&(i, j)| {
                    let (v, w) = (&vectors[i], &vectors[j]);
                    match measure {
                        Measure::Euclidean => euclidean(v, w).expect("one network"),
                        _ => pseudo_hamming(v, w).expect("one network") as f64,
                    }
                })
                .collect()
        }
    };

    let mut values = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    DistanceMatrix {
        measure,
        labels: set.labels(),
        values,
    }
}
