use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    fit_features, nonzero_rows, require_labels, train_classifier, PipelineConfig, PipelineError,
    Result,
};
use crate::corpus::{self, CleanDocument, RawDocument};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub fold_support_vectors: Vec<usize>,
    pub fold_test_sizes: Vec<usize>,
    pub mean_accuracy: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std_accuracy: f64,
    /// `mean − 1.96·std`.
    pub ci95_lower: f64,
    pub mean_support_vectors: f64,
}

impl CvReport {
    pub fn from_folds(
        accuracies: Vec<f64>,
        support_vectors: Vec<usize>,
        sizes: Vec<usize>,
    ) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = if accuracies.len() > 1 {
            accuracies
                .iter()
                .map(|a| (a - mean) * (a - mean))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        let mean_sv = support_vectors.iter().sum::<usize>() as f64 / support_vectors.len() as f64;
        Self {
            fold_accuracies: accuracies,
            fold_support_vectors: support_vectors,
            fold_test_sizes: sizes,
            mean_accuracy: mean,
            std_accuracy: std,
            ci95_lower: mean - 1.96 * std,
            mean_support_vectors: mean_sv,
        }
    }
}

/// Fold index of every document. Stratified splitting shuffles each class
/// (in sorted class order) and deals its members round-robin, continuing the
/// rotation from one class to the next so fold sizes differ by at most one.
pub fn fold_assignment(
    labels: &[String],
    folds: usize,
    stratified: bool,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(PipelineError::Config(format!(
            "folds must be at least 2, got {folds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    if stratified {
        let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            members.entry(l).or_default().push(i);
        }
        if let Some((class, idx)) = members.iter().find(|(_, idx)| idx.len() < folds) {
            return Err(PipelineError::ClassTooSmall {
                class: class.to_string(),
                count: idx.len(),
                folds,
            });
        }
        let mut next = 0;
        for idx in members.values_mut() {
            idx.shuffle(&mut rng);
            for &i in idx.iter() {
                out[i] = next % folds;
                next += 1;
            }
        }
    } else {
        if labels.len() < folds {
            return Err(PipelineError::Config(format!(
                "{} documents cannot fill {folds} folds",
                labels.len()
            )));
        }
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            out[i] = pos % folds;
        }
    }
    Ok(out)
}

/// Latent features of one fold, fitted on its training part only.
struct Fold {
    train_rows: Vec<Vec<f64>>,
    train_labels: Vec<String>,
    train_nonzero: Vec<bool>,
    test_rows: Vec<Vec<f64>>,
    test_labels: Vec<String>,
}

fn prepare_folds(docs: &[RawDocument], config: &PipelineConfig) -> Result<Vec<Fold>> {
    let labels = require_labels(docs)?;
    let clean = corpus::preprocess_all(docs, &config.scrub_rules);
    let assign = fold_assignment(&labels, config.folds, config.stratified, config.seed)?;
    let split =
        |f: usize| -> (Vec<usize>, Vec<usize>) { (0..docs.len()).partition(|&i| assign[i] != f) };
    let pick = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| labels[i].clone()).collect() };

    if config.fit_transform_once {
        let fitted = fit_features(&clean, &labels, config)?;
        let nonzero = nonzero_rows(&clean, &fitted.model);
        let rows = |idx: &[usize]| -> Vec<Vec<f64>> {
            idx.iter().map(|&i| fitted.rows[i].clone()).collect()
        };
        return Ok((0..config.folds)
            .map(|f| {
                let (train, test) = split(f);
                Fold {
                    train_rows: rows(&train),
                    train_labels: pick(&train),
                    train_nonzero: train.iter().map(|&i| nonzero[i]).collect(),
                    test_rows: rows(&test),
                    test_labels: pick(&test),
                }
            })
            .collect());
    }

    let prepared: Vec<Result<Fold>> = (0..config.folds)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split(f);
            let train_docs: Vec<CleanDocument> = train.iter().map(|&i| clean[i].clone()).collect();
            let train_labels = pick(&train);
            let fitted = fit_features(&train_docs, &train_labels, config)?;
            let train_nonzero = nonzero_rows(&train_docs, &fitted.model);
            Ok(Fold {
                train_rows: fitted.rows,
                train_labels,
                train_nonzero,
                test_rows: test
                    .iter()
                    .map(|&i| fitted.model.transform(&clean[i]))
                    .collect(),
                test_labels: pick(&test),
            })
        })
        .collect();
    prepared.into_iter().collect()
}

fn evaluate(folds: &[Fold], gamma: f64, nu: f64, config: &PipelineConfig) -> Result<CvReport> {
    let results: Vec<Result<(f64, usize, usize)>> = folds
        .par_iter()
        .map(|fold| {
            let model = train_classifier(
                &fold.train_rows,
                &fold.train_labels,
                &fold.train_nonzero,
                gamma,
                nu,
                config,
            )?;
            let mut correct = 0;
            for (x, y) in fold.test_rows.iter().zip(&fold.test_labels) {
                if model.predict(x)?.label == *y {
                    correct += 1;
                }
            }
            let n = fold.test_rows.len();
            Ok((correct as f64 / n as f64, model.total_support_vectors, n))
        })
        .collect();
    let mut acc = Vec::with_capacity(folds.len());
    let mut svs = Vec::with_capacity(folds.len());
    let mut sizes = Vec::with_capacity(folds.len());
    for r in results {
        let (a, s, n) = r?;
        acc.push(a);
        svs.push(s);
        sizes.push(n);
    }
    Ok(CvReport::from_folds(acc, svs, sizes))
}

/// k-fold cross-validation at `config.gamma`, `config.nu`.
pub fn cross_validate(docs: &[RawDocument], config: &PipelineConfig) -> Result<CvReport> {
    config.validate()?;
    let folds = prepare_folds(docs, config)?;
    evaluate(&folds, config.gamma, config.nu, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    InfeasibleNu,
    Failed,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::InfeasibleNu => "infeasible_nu",
            RowStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub gamma: f64,
    pub nu: f64,
    pub status: RowStatus,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_support_vectors: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl GridRow {
    fn from_result(gamma: f64, nu: f64, r: Result<CvReport>) -> Self {
        let blank = |status, message: String| GridRow {
            gamma,
            nu,
            status,
            mean_accuracy: None,
            std_accuracy: None,
            mean_support_vectors: None,
            message: Some(message),
        };
        match r {
            Ok(cv) => GridRow {
                gamma,
                nu,
                status: RowStatus::Ok,
                mean_accuracy: Some(cv.mean_accuracy),
                std_accuracy: Some(cv.std_accuracy),
                mean_support_vectors: Some(cv.mean_support_vectors),
                message: None,
            },
            Err(e) if e.is_infeasible() => blank(RowStatus::InfeasibleNu, e.to_string()),
            Err(e) => blank(RowStatus::Failed, e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub gamma_grid: Vec<f64>,
    pub nu_grid: Vec<f64>,
    /// γ-major: row `g·|ν grid| + n` holds `(gamma_grid[g], nu_grid[n])`.
    pub rows: Vec<GridRow>,
    pub best: Option<usize>,
}

impl GridReport {
    pub fn best_row(&self) -> Option<&GridRow> {
        self.best.map(|i| &self.rows[i])
    }
}

/// Index of the best `ok` row: highest mean accuracy, then fewer mean
/// support vectors, then smaller γ, then smaller ν.
pub fn select_best(rows: &[GridRow]) -> Option<usize> {
    let key = |r: &GridRow| {
        (
            r.mean_accuracy.unwrap_or(f64::NAN),
            r.mean_support_vectors.unwrap_or(f64::NAN),
        )
    };
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.status == RowStatus::Ok)
        .min_by(|(_, a), (_, b)| {
            let (acc_a, sv_a) = key(a);
            let (acc_b, sv_b) = key(b);
            acc_b
                .total_cmp(&acc_a)
                .then(sv_a.total_cmp(&sv_b))
                .then(a.gamma.total_cmp(&b.gamma))
                .then(a.nu.total_cmp(&b.nu))
                .then(Ordering::Equal)
        })
        .map(|(i, _)| i)
}

/// Cross-validates every (γ, ν) pair. Fold features are fitted once and
/// shared by all cells.
pub fn grid_search(
    docs: &[RawDocument],
    gamma_grid: &[f64],
    nu_grid: &[f64],
    config: &PipelineConfig,
) -> Result<GridReport> {
    if gamma_grid.is_empty() || nu_grid.is_empty() {
        return Err(PipelineError::Config(
            "gamma and nu grids must be non-empty".into(),
        ));
    }
    config.validate()?;
    require_labels(docs)?;
    let cells: Vec<(f64, f64)> = gamma_grid
        .iter()
        .flat_map(|&g| nu_grid.iter().map(move |&n| (g, n)))
        .collect();
    let rows: Vec<GridRow> = match prepare_folds(docs, config) {
        Ok(folds) => cells
            .par_iter()
            .map(|&(g, n)| {
                let r = PipelineConfig {
                    gamma: g,
                    nu: n,
                    ..config.clone()
                }
                .validate()
                .and_then(|_| evaluate(&folds, g, n, config));
                GridRow::from_result(g, n, r)
            })
            .collect(),
        Err(PipelineError::ClassTooSmall {
            class,
            count,
            folds,
        }) => {
            return Err(PipelineError::ClassTooSmall {
                class,
                count,
                folds,
            })
        }
        Err(e) => {
            let msg = e.to_string();
            log::error!("feature preparation failed: {msg}");
            cells
                .iter()
                .map(|&(g, n)| GridRow::from_result(g, n, Err(PipelineError::Config(msg.clone()))))
                .collect()
        }
    };
    let best = select_best(&rows);
    Ok(GridReport {
        gamma_grid: gamma_grid.to_vec(),
        nu_grid: nu_grid.to_vec(),
        rows,
        best,
    })
}
