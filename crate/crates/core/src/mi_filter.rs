//! Mutual-information term selection.
//!
//! Each term-probability column is discretized into equal-width bins over
//! its observed range and paired with a binary category indicator; the
//! plug-in mutual information (in bits) of the resulting 2-D histogram scores
//! the term. A term survives when its best score over all categories is
//! strictly above the threshold.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::dtm::{TermMatrix, Weighting};

#[derive(Debug, Error)]
pub enum MiError {
    #[error("x has {x} samples but y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("bins must be at least 2, got {0}")]
    TooFewBins(usize),
    #[error("threshold must be a finite non-negative number of bits, got {0}")]
    BadThreshold(f64),
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("mutual information needs a probability matrix, got {0}")]
    WrongScheme(Weighting),
    #[error("{labels} labels for {rows} documents")]
    LabelCount { labels: usize, rows: usize },
    #[error("term selection is empty")]
    EmptySelection,
    #[error("term index {index} out of range for vocabulary of {len}")]
    BadIndex { index: usize, len: usize },
    #[error("selected indices must be strictly increasing")]
    Unsorted,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRule {
    pub threshold_bits: f64,
    pub bins: usize,
}

impl Default for SelectionRule {
    fn default() -> Self {
        Self {
            threshold_bits: 0.0035,
            bins: 100,
        }
    }
}

impl SelectionRule {
    pub fn validate(&self) -> Result<(), MiError> {
        if !(self.threshold_bits.is_finite() && self.threshold_bits >= 0.0) {
            return Err(MiError::BadThreshold(self.threshold_bits));
        }
        if self.bins < 2 {
            return Err(MiError::TooFewBins(self.bins));
        }
        Ok(())
    }
}

/// Terms × categories mutual information in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiTable {
    pub terms: Vec<String>,
    pub categories: Vec<String>,
    /// Row-major, `terms.len() * categories.len()` entries.
    pub values: Vec<f64>,
}

impl MiTable {
    pub fn get(&self, term: usize, category: usize) -> f64 {
        self.values[term * self.categories.len() + category]
    }

    pub fn row(&self, term: usize) -> &[f64] {
        let c = self.categories.len();
        &self.values[term * c..(term + 1) * c]
    }

    pub fn max_over_categories(&self, term: usize) -> f64 {
        self.row(term).iter().copied().fold(0.0, f64::max)
    }

    /// The `n` highest-scoring terms for one category, best first.
    pub fn top_terms(&self, category: usize, n: usize) -> Vec<(&str, f64)> {
        let mut scored: Vec<(&str, f64)> = (0..self.terms.len())
            .map(|j| (self.terms[j].as_str(), self.get(j, category)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(n);
        scored
    }

    /// `term,category,mi_bits` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MiError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "category", "mi_bits"])
            .map_err(csv_io)?;
        for (j, term) in self.terms.iter().enumerate() {
            for (c, cat) in self.categories.iter().enumerate() {
                w.write_record([term.as_str(), cat.as_str(), &self.get(j, c).to_string()])
                    .map_err(csv_io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> MiError {
    MiError::Io(std::io::Error::other(e))
}

/// Bin index of every sample: `bins` equal-width bins spanning
/// `[min(x), max(x)]`, the last bin closed on the right. A constant vector
/// lands entirely in bin 0.
pub fn discretize(x: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0; x.len()];
    }
    x.iter()
        .map(|&v| {
            let t = (v - lo) / range * bins as f64;
            (t.floor() as usize).min(bins - 1)
        })
        .collect()
}

/// Plug-in MI (bits) from a joint count table `counts[bin][class]`.
fn mi_from_counts(counts: &[[usize; 2]], total: usize) -> f64 {
    let n = total as f64;
    let mut class_tot = [0usize; 2];
    for c in counts {
        class_tot[0] += c[0];
        class_tot[1] += c[1];
    }
    let mut mi = 0.0;
    for c in counts {
        let bin_tot = (c[0] + c[1]) as f64;
        for y in 0..2 {
            if c[y] == 0 {
                continue;
            }
            let joint = c[y] as f64;
            mi += joint / n * (joint * n / (bin_tot * class_tot[y] as f64)).log2();
        }
    }
    // Rounding can leave a tiny negative residue on independent data.
    mi.max(0.0)
}

/// Mutual information in bits between a real-valued variable and a binary label.
pub fn estimate_mi(x: &[f64], y: &[bool], bins: usize) -> Result<f64, MiError> {
    if x.len() != y.len() {
        return Err(MiError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MiError::TooFewSamples(x.len()));
    }
    if bins < 2 {
        return Err(MiError::TooFewBins(bins));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(MiError::NonFinite(i));
    }
    let mut counts = vec![[0usize; 2]; bins];
    for (b, &label) in discretize(x, bins).into_iter().zip(y) {
        counts[b][label as usize] += 1;
    }
    Ok(mi_from_counts(&counts, x.len()))
}

/// MI of every term column against every category indicator.
///
/// Categories are the distinct labels in sorted order.
pub fn compute_mi_table(
    m: &TermMatrix,
    vocab: &Vocabulary,
    labels: &[String],
    rule: &SelectionRule,
) -> Result<MiTable, MiError> {
    rule.validate()?;
    if m.scheme() != Weighting::Probability {
        return Err(MiError::WrongScheme(m.scheme()));
    }
    if labels.len() != m.rows() {
        return Err(MiError::LabelCount {
            labels: labels.len(),
            rows: m.rows(),
        });
    }
    if m.rows() < 2 {
        return Err(MiError::TooFewSamples(m.rows()));
    }
    let categories: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_of: Vec<usize> = labels
        .iter()
        .map(|l| categories.binary_search(l).expect("label is a category"))
        .collect();
    let n_cat = categories.len();
    let n = m.rows();
    let columns = m.columns_sparse();

    let rows: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|entries| {
            let mut col = vec![0.0; n];
            for &(i, v) in entries {
                col[i] = v;
            }
            let bins = discretize(&col, rule.bins);
            let mut bin_tot = vec![0usize; rule.bins];
            let mut joint = vec![0usize; rule.bins * n_cat];
            for (&b, &c) in bins.iter().zip(&class_of) {
                bin_tot[b] += 1;
                joint[b * n_cat + c] += 1;
            }
            let mut counts = vec![[0usize; 2]; rule.bins];
            (0..n_cat)
                .map(|c| {
                    for b in 0..rule.bins {
                        let inside = joint[b * n_cat + c];
                        counts[b] = [bin_tot[b] - inside, inside];
                    }
                    mi_from_counts(&counts, n)
                })
                .collect()
        })
        .collect();

    Ok(MiTable {
        terms: vocab.terms().to_vec(),
        categories,
        values: rows.into_iter().flatten().collect(),
    })
}

/// Indices of terms whose best category score is strictly above the threshold.
pub fn select_terms(table: &MiTable, rule: &SelectionRule) -> Vec<usize> {
    (0..table.terms.len())
        .filter(|&j| table.max_over_categories(j) > rule.threshold_bits)
        .collect()
}

pub fn filter_vocabulary(vocab: &Vocabulary, selected: &[usize]) -> Result<Vocabulary, MiError> {
    if selected.is_empty() {
        return Err(MiError::EmptySelection);
    }
    if selected.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MiError::Unsorted);
    }
    if let Some(&bad) = selected.iter().find(|&&i| i >= vocab.len()) {
        return Err(MiError::BadIndex {
            index: bad,
            len: vocab.len(),
        });
    }
    Ok(Vocabulary::from(
        selected
            .iter()
            .map(|&i| vocab.term(i).to_string())
            .collect::<Vec<_>>(),
    ))
}
