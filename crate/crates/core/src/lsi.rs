//! Latent semantic indexing.
//!
//! A rank-k SVD `A ≈ U_k D_k V_kᵀ` of the documents × terms matrix gives the
//! latent axes. A term vector `b` is mapped to `b · V_k`: the whitened
//! coordinates `b · V_k · D_k⁻¹` rescaled by the singular values, which needs
//! no inverse and is what the classifier consumes. The whitened form is kept
//! for comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtm::TermMatrix;
use crate::linalg::{thin_svd, DenseMatrix, LinalgError};

#[derive(Debug, Error, PartialEq)]
pub enum LsiError {
    #[error("rank {k} outside 1..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("matrix has no nonzero entries")]
    ZeroMatrix,
    #[error("vector has length {got}, projector expects {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("singular value {index} is zero; whitened projection undefined")]
    SingularScaling { index: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Leading `k` singular triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// p × k, orthonormal columns.
    pub u: DenseMatrix,
    /// k values, non-increasing.
    pub d: Vec<f64>,
    /// n × k, orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn k(&self) -> usize {
        self.d.len()
    }

    pub fn projector(&self) -> LsiProjector {
        LsiProjector {
            vocab_size: self.v.rows(),
            v: self.v.clone(),
            d: self.d.clone(),
        }
    }
}

/// Right singular vectors and singular values retained for projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsiProjector {
    pub v: DenseMatrix,
    pub d: Vec<f64>,
    pub vocab_size: usize,
}

pub fn truncated_svd(a: &TermMatrix, k: usize) -> Result<SvdFactors, LsiError> {
    let max = a.rows().min(a.cols());
    if k == 0 || k > max {
        return Err(LsiError::RankOutOfRange { k, max });
    }
    if a.nnz() == 0 {
        return Err(LsiError::ZeroMatrix);
    }
    let dense = DenseMatrix::from_rows(&a.to_dense());
    let svd = thin_svd(&dense)?;
    Ok(SvdFactors {
        u: svd.u.truncate_cols(k),
        d: svd.s[..k].to_vec(),
        v: svd.v.truncate_cols(k),
    })
}

impl LsiProjector {
    pub fn k(&self) -> usize {
        self.d.len()
    }

    /// `b · V_k`.
    pub fn project(&self, b: &[f64]) -> Result<Vec<f64>, LsiError> {
        self.check_len(b.len())?;
        Ok((0..self.k())
            .map(|j| crate::linalg::dot(b, self.v.col(j)))
            .collect())
    }

    /// `b · V_k` for a sparse `(term, value)` vector.
    pub fn project_sparse(&self, entries: &[(usize, f64)]) -> Result<Vec<f64>, LsiError> {
        if let Some(&(bad, _)) = entries.iter().find(|(c, _)| *c >= self.vocab_size) {
            return Err(LsiError::LengthMismatch {
                got: bad + 1,
                expected: self.vocab_size,
            });
        }
        Ok((0..self.k())
            .map(|j| {
                let col = self.v.col(j);
                entries.iter().map(|&(c, x)| x * col[c]).sum()
            })
            .collect())
    }

    /// `b · V_k · D_k⁻¹`.
    pub fn project_whitened(&self, b: &[f64]) -> Result<Vec<f64>, LsiError> {
        if let Some(index) = self.d.iter().position(|&d| d == 0.0) {
            return Err(LsiError::SingularScaling { index });
        }
        let p = self.project(b)?;
        Ok(p.into_iter().zip(&self.d).map(|(x, d)| x / d).collect())
    }

    /// Latent coordinates of every row of `m`.
    pub fn project_rows(&self, m: &TermMatrix) -> Result<Vec<Vec<f64>>, LsiError> {
        self.check_len(m.cols())?;
        (0..m.rows())
            .map(|i| {
                let (idx, val) = m.row(i);
                let entries: Vec<(usize, f64)> =
                    idx.iter().copied().zip(val.iter().copied()).collect();
                self.project_sparse(&entries)
            })
            .collect()
    }

    fn check_len(&self, got: usize) -> Result<(), LsiError> {
        if got != self.vocab_size {
            return Err(LsiError::LengthMismatch {
                got,
                expected: self.vocab_size,
            });
        }
        Ok(())
    }
}

/// `(1-based index, singular value)` pairs.
pub fn singular_value_report(d: &[f64]) -> Vec<(usize, f64)> {
    d.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtm::Weighting;

    fn matrix(rows: &[&[f64]]) -> TermMatrix {
        let cols = rows[0].len();
        let data = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        TermMatrix::from_rows(cols, data, Weighting::Probability, ids)
    }

    #[test]
    fn identity_spectrum() {
        let f = truncated_svd(
            &matrix(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
            3,
        )
        .unwrap();
        assert_eq!(
            singular_value_report(&f.d),
            vec![(1, 1.0), (2, 1.0), (3, 1.0)]
        );
    }

    #[test]
    fn rank_one_value() {
        let x = [1.0, 2.0];
        let y = [3.0, 0.0, 4.0];
        let rows: Vec<Vec<f64>> = x
            .iter()
            .map(|a| y.iter().map(|b| a * b).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let f = truncated_svd(&matrix(&refs), 1).unwrap();
        assert!((f.d[0] - 5f64.sqrt() * 5.0).abs() < 1e-12);
    }

    #[test]
    fn rank_errors() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(
            truncated_svd(&m, 3).unwrap_err(),
            LsiError::RankOutOfRange { k: 3, max: 2 }
        );
        assert!(truncated_svd(&m, 0).is_err());
        assert_eq!(
            truncated_svd(&matrix(&[&[0.0, 0.0]]), 1).unwrap_err(),
            LsiError::ZeroMatrix
        );
    }

    #[test]
    fn projections() {
        let a = matrix(&[&[0.5, 0.5, 0.0], &[0.0, 0.25, 0.75], &[1.0, 0.0, 0.0]]);
        let f = truncated_svd(&a, 2).unwrap();
        let p = f.projector();
        assert_eq!(p.project(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.project_whitened(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        for i in 0..3 {
            let b = a.row_dense(i);
            let proj = p.project(&b).unwrap();
            let white = p.project_whitened(&b).unwrap();
            for j in 0..2 {
                assert!((proj[j] - f.u[(i, j)] * f.d[j]).abs() < 1e-12);
                assert!((white[j] - f.u[(i, j)]).abs() < 1e-12);
            }
        }
        assert!(matches!(
            p.project(&[1.0]),
            Err(LsiError::LengthMismatch {
                got: 1,
                expected: 3
            })
        ));
    }

    #[test]
    fn orthogonal_full_rank_preserves_norm() {
        let a = matrix(&[&[2.0, 1.0], &[0.5, 3.0]]);
        let p = truncated_svd(&a, 2).unwrap().projector();
        let b = [0.3, -1.7];
        let out = p.project(&b).unwrap();
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n(&out) - n(&b)).abs() < 1e-12);
    }

    #[test]
    fn whitening_rejects_zero_singular_value() {
        let p = LsiProjector {
            v: DenseMatrix::identity(2),
            d: vec![1.0, 0.0],
            vocab_size: 2,
        };
        assert_eq!(
            p.project_whitened(&[1.0, 1.0]).unwrap_err(),
            LsiError::SingularScaling { index: 1 }
        );
    }
}
