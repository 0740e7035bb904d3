//! Sparse document-term matrices and their weighting schemes.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CleanDocument, Vocabulary};

#[derive(Debug, Error)]
pub enum DtmError {
    #[error("expected a {expected} matrix, got {actual}")]
    WrongScheme {
        expected: Weighting,
        actual: Weighting,
    },
    #[error("tf-idf vectors need corpus idf statistics; use the fitted pipeline model")]
    TfidfNeedsCorpus,
    #[error("matrix has no rows")]
    NoRows,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cell semantics of a [`TermMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Frequency,
    Probability,
    Boolean,
    /// Row-probability tf times smoothed natural-log idf, `ln((1+p)/(1+df))`.
    Tfidf,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Frequency => "frequency",
            Weighting::Probability => "probability",
            Weighting::Boolean => "boolean",
            Weighting::Tfidf => "tfidf",
        })
    }
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frequency" => Ok(Weighting::Frequency),
            "probability" => Ok(Weighting::Probability),
            "boolean" => Ok(Weighting::Boolean),
            "tfidf" => Ok(Weighting::Tfidf),
            other => Err(format!("unknown weighting scheme {other:?}")),
        }
    }
}

/// Documents × terms matrix in compressed sparse row form.
///
/// Column indices within a row are strictly increasing and no zero is ever
/// stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    scheme: Weighting,
    doc_ids: Vec<String>,
}

impl TermMatrix {
    /// Builds a matrix from per-row `(col, value)` lists. Zeros are dropped and
    /// columns sorted; duplicate columns are summed.
    pub fn from_rows(
        cols: usize,
        rows: Vec<Vec<(usize, f64)>>,
        scheme: Weighting,
        doc_ids: Vec<String>,
    ) -> Self {
        assert_eq!(rows.len(), doc_ids.len(), "one id per row");
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                assert!(c < cols, "column {c} out of range {cols}");
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: doc_ids.len(),
            cols,
            indptr,
            indices,
            values,
            scheme,
            doc_ids,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn scheme(&self) -> Weighting {
        self.scheme
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        let (idx, val) = self.row(i);
        for (&c, &v) in idx.iter().zip(val) {
            out[c] = v;
        }
        out
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.indptr[i] == self.indptr[i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => val[p],
            Err(_) => 0.0,
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row_dense(i)).collect()
    }

    /// Dense columns, one `Vec` of length `rows` per term.
    pub fn columns_dense(&self) -> Vec<Vec<f64>> {
        let mut cols = vec![vec![0.0; self.rows]; self.cols];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                cols[c][i] = v;
            }
        }
        cols
    }

    /// Sparse columns: `(row, value)` pairs per term, rows increasing.
    pub fn columns_sparse(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                cols[c].push((i, v));
            }
        }
        cols
    }

    /// Number of rows in which each column is nonzero.
    pub fn document_frequencies(&self) -> Vec<usize> {
        let mut df = vec![0usize; self.cols];
        for &c in &self.indices {
            df[c] += 1;
        }
        df
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> TermMatrix {
        let data = rows
            .iter()
            .map(|&i| {
                let (idx, val) = self.row(i);
                idx.iter().copied().zip(val.iter().copied()).collect()
            })
            .collect();
        let ids = rows.iter().map(|&i| self.doc_ids[i].clone()).collect();
        TermMatrix::from_rows(self.cols, data, self.scheme, ids)
    }

    fn map_rows(&self, scheme: Weighting, f: impl Fn(&[usize], &[f64]) -> Vec<f64>) -> Self {
        let rows = (0..self.rows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().copied().zip(f(idx, val)).collect()
            })
            .collect();
        TermMatrix::from_rows(self.cols, rows, scheme, self.doc_ids.clone())
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "% weighting: {}", self.scheme)?;
        writeln!(out, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                writeln!(out, "{} {} {:e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Term counts; tokens missing from `vocab` are skipped.
pub fn build_tfm(docs: &[CleanDocument], vocab: &Vocabulary) -> TermMatrix {
    let rows = docs.iter().map(|d| count_terms(&d.tokens, vocab)).collect();
    let ids = docs.iter().map(|d| d.id.clone()).collect();
    TermMatrix::from_rows(vocab.len(), rows, Weighting::Frequency, ids)
}

fn count_terms(tokens: &[String], vocab: &Vocabulary) -> Vec<(usize, f64)> {
    tokens
        .iter()
        .filter_map(|t| vocab.index_of(t))
        .map(|c| (c, 1.0))
        .collect()
}

fn require(m: &TermMatrix, expected: Weighting) -> Result<(), DtmError> {
    if m.scheme != expected {
        return Err(DtmError::WrongScheme {
            expected,
            actual: m.scheme,
        });
    }
    Ok(())
}

fn normalize(val: &[f64]) -> Vec<f64> {
    let sum: f64 = val.iter().sum();
    val.iter().map(|v| v / sum).collect()
}

pub fn to_probability(m: &TermMatrix) -> Result<TermMatrix, DtmError> {
    require(m, Weighting::Frequency)?;
    Ok(m.map_rows(Weighting::Probability, |_, val| normalize(val)))
}

pub fn to_boolean(m: &TermMatrix) -> Result<TermMatrix, DtmError> {
    require(m, Weighting::Frequency)?;
    Ok(m.map_rows(Weighting::Boolean, |_, val| vec![1.0; val.len()]))
}

/// Smoothed inverse document frequencies `ln((1+p)/(1+df))` of a count matrix.
pub fn idf_weights(m: &TermMatrix) -> Result<Vec<f64>, DtmError> {
    require(m, Weighting::Frequency)?;
    if m.rows == 0 {
        return Err(DtmError::NoRows);
    }
    let p = m.rows as f64;
    Ok(m.document_frequencies()
        .into_iter()
        .map(|df| ((1.0 + p) / (1.0 + df as f64)).ln())
        .collect())
}

pub fn to_tfidf(m: &TermMatrix) -> Result<TermMatrix, DtmError> {
    let idf = idf_weights(m)?;
    Ok(apply_tfidf(m, &idf))
}

/// Weights a count matrix with precomputed idf values.
pub(crate) fn apply_tfidf(m: &TermMatrix, idf: &[f64]) -> TermMatrix {
    m.map_rows(Weighting::Tfidf, |idx, val| {
        normalize(val)
            .into_iter()
            .zip(idx)
            .map(|(tf, &c)| tf * idf[c])
            .collect()
    })
}

/// Converts a count matrix to any scheme; tf-idf uses the matrix's own idf.
pub fn apply_weighting(m: &TermMatrix, scheme: Weighting) -> Result<TermMatrix, DtmError> {
    match scheme {
        Weighting::Frequency => {
            require(m, Weighting::Frequency)?;
            Ok(m.clone())
        }
        Weighting::Probability => to_probability(m),
        Weighting::Boolean => to_boolean(m),
        Weighting::Tfidf => to_tfidf(m),
    }
}

/// Sparse `(col, value)` vector of one document under a corpus-free scheme.
pub fn vectorize_sparse(
    tokens: &[String],
    vocab: &Vocabulary,
    scheme: Weighting,
) -> Result<Vec<(usize, f64)>, DtmError> {
    let counts = TermMatrix::from_rows(
        vocab.len(),
        vec![count_terms(tokens, vocab)],
        Weighting::Frequency,
        vec![String::new()],
    );
    let weighted = match scheme {
        Weighting::Tfidf => return Err(DtmError::TfidfNeedsCorpus),
        s => apply_weighting(&counts, s)?,
    };
    let (idx, val) = weighted.row(0);
    Ok(idx.iter().copied().zip(val.iter().copied()).collect())
}

pub fn vectorize_document(
    tokens: &[String],
    vocab: &Vocabulary,
    scheme: Weighting,
) -> Result<Vec<f64>, DtmError> {
    let mut out = vec![0.0; vocab.len()];
    for (c, v) in vectorize_sparse(tokens, vocab, scheme)? {
        out[c] = v;
    }
    Ok(out)
}
