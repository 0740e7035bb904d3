//! ν-support-vector classification with an RBF kernel.
//!
//! Binary problems are solved by [`solver::solve_nu_svc`]; multiclass models
//! train one classifier per class pair and predict by majority vote.

mod balance;
mod kernel;
pub mod solver;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use balance::{inverse_weights, oversample, oversample_indices, BalancingStrategy};
pub use kernel::{rbf, RbfKernel};
pub use solver::{solve_nu_svc, NuSolution, SolverConfig};

/// Slack allowed when comparing ν against its feasibility bound.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasiblePair {
    pub positive: String,
    pub negative: String,
    pub bound: f64,
}

impl fmt::Display for InfeasiblePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} (max nu {:.4})",
            self.positive, self.negative, self.bound
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("infeasible nu {nu}: {}", .pairs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    InfeasibleNu { nu: f64, pairs: Vec<InfeasiblePair> },
    #[error("solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("labels must be +1 or -1, found {0}")]
    InvalidLabel(i8),
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("{points} points but {labels} labels")]
    LabelCount { points: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
}

impl SvmError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, SvmError::InfeasibleNu { .. })
    }
}

/// Largest admissible ν for a two-class problem with the given weighted
/// class masses (count × weight).
pub fn nu_bound(mass_pos: f64, mass_neg: f64) -> f64 {
    2.0 * mass_pos.min(mass_neg) / (mass_pos + mass_neg)
}

/// `ν ≤ 2·min(m₊, m₋)/(m₊ + m₋)`.
pub fn nu_feasible(m_pos: usize, m_neg: usize, nu: f64) -> bool {
    nu > 0.0 && nu <= nu_bound(m_pos as f64, m_neg as f64) + BOUND_SLACK
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub positive: f64,
    pub negative: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self {
            positive: 1.0,
            negative: 1.0,
        }
    }
}

/// Trained two-class model: `f(x) = Σ coef_i·K(sv_i, x) − rho`, positive
/// values select `classes.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryNuSvc {
    pub classes: (String, String),
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Training-set index of each support vector.
    pub sv_indices: Vec<usize>,
    /// Training points whose dual variable sits at its upper bound.
    pub margin_errors: usize,
    pub training_size: usize,
}

impl BinaryNuSvc {
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let k = RbfKernel { gamma: self.gamma };
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * k.eval(sv, x))
            .sum::<f64>()
            - self.rho
    }

    pub fn support_fraction(&self) -> f64 {
        self.support_vectors.len() as f64 / self.training_size as f64
    }

    pub fn margin_error_fraction(&self) -> f64 {
        self.margin_errors as f64 / self.training_size as f64
    }
}

fn check_params(gamma: f64, nu: f64) -> Result<(), SvmError> {
    RbfKernel::new(gamma)?;
    if !(nu.is_finite() && nu > 0.0) {
        return Err(SvmError::InvalidParameter(format!(
            "nu must lie in (0, 1], got {nu}"
        )));
    }
    Ok(())
}

/// Trains on `points[i]` with `labels[i] ∈ {+1, −1}`.
pub fn train_binary(
    points: &[Vec<f64>],
    labels: &[i8],
    gamma: f64,
    nu: f64,
    weights: ClassWeights,
    config: &SolverConfig,
) -> Result<BinaryNuSvc, SvmError> {
    if points.len() != labels.len() {
        return Err(SvmError::LabelCount {
            points: points.len(),
            labels: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(SvmError::InvalidLabel(bad));
    }
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    let source: Vec<usize> = (0..points.len()).collect();
    train_pair(
        &refs,
        labels,
        &source,
        weights,
        gamma,
        nu,
        ("+1".to_string(), "-1".to_string()),
        config,
    )
}

#[allow(clippy::too_many_arguments)]
fn train_pair(
    points: &[&[f64]],
    y: &[i8],
    source: &[usize],
    weights: ClassWeights,
    gamma: f64,
    nu: f64,
    classes: (String, String),
    config: &SolverConfig,
) -> Result<BinaryNuSvc, SvmError> {
    check_params(gamma, nu)?;
    let dim = points.first().map_or(0, |p| p.len());
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(SvmError::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    let m_pos = y.iter().filter(|&&l| l > 0).count();
    let m_neg = y.len() - m_pos;
    if m_pos == 0 || m_neg == 0 {
        return Err(SvmError::TooFewClasses(1));
    }
    let bound = nu_bound(
        weights.positive * m_pos as f64,
        weights.negative * m_neg as f64,
    );
    if nu > bound + BOUND_SLACK {
        return Err(SvmError::InfeasibleNu {
            nu,
            pairs: vec![InfeasiblePair {
                positive: classes.0,
                negative: classes.1,
                bound,
            }],
        });
    }

    let upper: Vec<f64> = y
        .iter()
        .map(|&l| {
            if l > 0 {
                weights.positive
            } else {
                weights.negative
            }
        })
        .collect();
    let kernel = RbfKernel::new(gamma)?;
    let sol = solve_nu_svc(points, y, &upper, nu, kernel, config)?;

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    let mut sv_indices = Vec::new();
    for i in 0..y.len() {
        if sol.alpha[i] > 0.0 {
            support_vectors.push(points[i].to_vec());
            dual_coefs.push(sol.alpha[i] * f64::from(y[i]) / sol.r);
            sv_indices.push(source[i]);
        }
    }
    let margin_errors = (0..y.len()).filter(|&i| sol.is_upper(i)).count();
    Ok(BinaryNuSvc {
        classes,
        support_vectors,
        dual_coefs,
        rho: sol.rho / sol.r,
        gamma,
        nu,
        sv_indices,
        margin_errors,
        training_size: y.len(),
    })
}

/// One-vs-one ensemble over sorted class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassNuSvc {
    pub classes: Vec<String>,
    /// Ordered (0,1), (0,2), …, (1,2), …; each positive class is the smaller.
    pub binary_models: Vec<BinaryNuSvc>,
    /// Distinct training points that are a support vector of some pair.
    pub total_support_vectors: usize,
    pub dim: usize,
    pub gamma: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    /// Votes per class, in class order.
    pub votes: Vec<(String, usize)>,
}

pub fn train_multiclass(
    points: &[Vec<f64>],
    labels: &[String],
    gamma: f64,
    nu: f64,
    balancing: BalancingStrategy,
    config: &SolverConfig,
) -> Result<MultiClassNuSvc, SvmError> {
    if points.len() != labels.len() {
        return Err(SvmError::LabelCount {
            points: points.len(),
            labels: labels.len(),
        });
    }
    check_params(gamma, nu)?;
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(SvmError::TooFewClasses(classes.len()));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(SvmError::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }

    let sample: Vec<usize> = match balancing {
        BalancingStrategy::Oversample { seed } => oversample_indices(labels, seed),
        _ => (0..points.len()).collect(),
    };
    let weights: BTreeMap<String, f64> = match balancing {
        BalancingStrategy::InverseWeights => inverse_weights(labels),
        _ => classes.iter().map(|c| (c.clone(), 1.0)).collect(),
    };
    let class_of = |i: usize| classes.binary_search(&labels[i]).expect("known class");
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for &i in &sample {
        members[class_of(i)].push(i);
    }

    let pairs: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b)))
        .collect();

    let infeasible: Vec<InfeasiblePair> = pairs
        .iter()
        .filter_map(|&(a, b)| {
            let bound = nu_bound(
                weights[&classes[a]] * members[a].len() as f64,
                weights[&classes[b]] * members[b].len() as f64,
            );
            (nu > bound + BOUND_SLACK).then(|| InfeasiblePair {
                positive: classes[a].clone(),
                negative: classes[b].clone(),
                bound,
            })
        })
        .collect();
    if !infeasible.is_empty() {
        return Err(SvmError::InfeasibleNu {
            nu,
            pairs: infeasible,
        });
    }

    let binary_models = pairs
        .par_iter()
        .map(|&(a, b)| {
            let idx: Vec<usize> = members[a].iter().chain(&members[b]).copied().collect();
            let pts: Vec<&[f64]> = idx.iter().map(|&i| points[i].as_slice()).collect();
            let y: Vec<i8> = members[a]
                .iter()
                .map(|_| 1)
                .chain(members[b].iter().map(|_| -1))
                .collect();
            let w = ClassWeights {
                positive: weights[&classes[a]],
                negative: weights[&classes[b]],
            };
            train_pair(
                &pts,
                &y,
                &idx,
                w,
                gamma,
                nu,
                (classes[a].clone(), classes[b].clone()),
                config,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let total_support_vectors = binary_models
        .iter()
        .flat_map(|m| m.sv_indices.iter().copied())
        .collect::<BTreeSet<_>>()
        .len();
    Ok(MultiClassNuSvc {
        classes,
        binary_models,
        total_support_vectors,
        dim,
        gamma,
        nu,
    })
}

impl MultiClassNuSvc {
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut votes = vec![0usize; self.classes.len()];
        for m in &self.binary_models {
            // A zero decision goes to the lexicographically smaller label,
            // which is always the positive class of the pair.
            let winner = if m.decision_value(x) >= 0.0 {
                &m.classes.0
            } else {
                &m.classes.1
            };
            let c = self
                .classes
                .binary_search(winner)
                .expect("pair classes come from the model");
            votes[c] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        Ok(Prediction {
            label: self.classes[best].clone(),
            votes: self.classes.iter().cloned().zip(votes).collect(),
        })
    }
}

pub fn predict(model: &MultiClassNuSvc, x: &[f64]) -> Result<Prediction, SvmError> {
    model.predict(x)
}
