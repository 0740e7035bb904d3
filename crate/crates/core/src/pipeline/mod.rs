//! End-to-end composition: preprocessing, term selection, latent projection
//! and classification, plus cross-validation, grid search and persistence.

mod cv;
mod report;
mod synthetic;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, CleanDocument, CorpusError, RawDocument, ScrubRules, Vocabulary};
use crate::dtm::{self, DtmError, TermMatrix, Weighting};
use crate::lsi::{truncated_svd, LsiError, LsiProjector, SvdFactors};
use crate::mi_filter::{self, MiError, SelectionRule};
use crate::nusvm::{self, BalancingStrategy, MultiClassNuSvc, Prediction, SolverConfig, SvmError};

pub use cv::{
    cross_validate, fold_assignment, grid_search, select_best, CvReport, GridReport, GridRow,
    RowStatus,
};
pub use report::{emit_reports, holdout_scatter, Holdout, ScatterPoint};
pub use synthetic::{generate_synthetic_corpus, synthetic_word};

pub const FORMAT_VERSION: u32 = 1;

pub const PAPER_GAMMA_GRID: [f64; 24] = [
    0.01, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 3.75, 4.0, 4.5, 5.0, 7.5, 10.0, 12.5, 15.0, 22.5,
    25.0, 30.0, 35.0, 37.5, 45.0, 128.0, 256.0,
];

pub const PAPER_NU_GRID: [f64; 17] = [
    0.005, 0.01, 0.0125, 0.015, 0.0175, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05, 0.07, 0.08,
    0.10, 0.15, 0.25,
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("document {0:?} has no label")]
    Unlabeled(String),
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("class {class:?} has {count} documents but {folds} folds were requested; use fewer folds or unstratified splits")]
    ClassTooSmall {
        class: String,
        count: usize,
        folds: usize,
    },
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("weighting: {0}")]
    Weighting(#[from] DtmError),
    #[error("term selection: {0}")]
    Selection(#[from] MiError),
    #[error("latent projection: {0}")]
    Lsi(#[from] LsiError),
    #[error("classifier: {0}")]
    Svm(#[from] SvmError),
    #[error("unsupported model format_version {found} (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("model parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, PipelineError::Svm(e) if e.is_infeasible())
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub weighting: Weighting,
    pub mi_threshold_bits: f64,
    pub mi_bins: usize,
    /// Upper limit; the fitted rank is capped by the matrix shape.
    pub k_latent: usize,
    pub gamma: f64,
    pub nu: f64,
    pub balancing: BalancingStrategy,
    pub folds: usize,
    pub stratified: bool,
    /// Fit vocabulary, term selection and SVD once on the whole corpus and
    /// only retrain the classifier per fold.
    pub fit_transform_once: bool,
    pub seed: u64,
    pub scrub_rules: ScrubRules,
    pub solver: SolverConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            weighting: Weighting::Probability,
            mi_threshold_bits: 0.0035,
            mi_bins: 100,
            k_latent: 2400,
            gamma: 3.5,
            nu: 0.025,
            balancing: BalancingStrategy::None,
            folds: 20,
            stratified: true,
            fit_transform_once: false,
            seed: 0,
            scrub_rules: ScrubRules::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn selection_rule(&self) -> SelectionRule {
        SelectionRule {
            threshold_bits: self.mi_threshold_bits,
            bins: self.mi_bins,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.selection_rule().validate()?;
        if self.k_latent == 0 {
            return bad("k_latent must be at least 1".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            ));
        }
        if !(self.nu.is_finite() && self.nu > 0.0 && self.nu <= 1.0) {
            return bad(format!("nu must lie in (0, 1], got {}", self.nu));
        }
        if !(self.solver.eps.is_finite() && self.solver.eps > 0.0) {
            return bad(format!(
                "solver eps must be positive, got {}",
                self.solver.eps
            ));
        }
        Ok(())
    }
}

/// Everything needed to map a cleaned document into the latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub vocabulary: Vocabulary,
    pub weighting: Weighting,
    /// Present iff the weighting is tf-idf; indexed like `vocabulary`.
    pub idf: Option<Vec<f64>>,
    pub projector: LsiProjector,
}

/// Output of fitting the unsupervised-plus-selection part of the pipeline.
pub struct FittedFeatures {
    pub model: FeatureModel,
    pub factors: SvdFactors,
    /// Latent coordinates of the training documents, in input order.
    pub rows: Vec<Vec<f64>>,
    /// Vocabulary size before term selection.
    pub full_vocabulary: usize,
}

impl FeatureModel {
    pub fn weighted_row(&self, doc: &CleanDocument) -> Vec<(usize, f64)> {
        let counts = dtm::build_tfm(std::slice::from_ref(doc), &self.vocabulary);
        let weighted = weigh(&counts, self.weighting, self.idf.as_deref())
            .expect("count matrix accepts every scheme");
        let (idx, val) = weighted.row(0);
        idx.iter().copied().zip(val.iter().copied()).collect()
    }

    pub fn transform(&self, doc: &CleanDocument) -> Vec<f64> {
        self.projector
            .project_sparse(&self.weighted_row(doc))
            .expect("indices come from the stored vocabulary")
    }
}

fn weigh(counts: &TermMatrix, scheme: Weighting, idf: Option<&[f64]>) -> Result<TermMatrix> {
    Ok(match (scheme, idf) {
        (Weighting::Tfidf, Some(idf)) => dtm::apply_tfidf(counts, idf),
        (s, _) => dtm::apply_weighting(counts, s)?,
    })
}

/// Vocabulary, MI term selection, weighting and truncated SVD fitted on `docs`.
pub fn fit_features(
    docs: &[CleanDocument],
    labels: &[String],
    config: &PipelineConfig,
) -> Result<FittedFeatures> {
    let vocab = corpus::build_vocabulary(docs)?;
    let counts = dtm::build_tfm(docs, &vocab);
    let prob = dtm::to_probability(&counts)?;
    let rule = config.selection_rule();
    let table = mi_filter::compute_mi_table(&prob, &vocab, labels, &rule)?;
    let selected = mi_filter::select_terms(&table, &rule);
    let filtered = mi_filter::filter_vocabulary(&vocab, &selected)?;
    log::debug!(
        "term selection kept {} of {} terms",
        filtered.len(),
        vocab.len()
    );

    let counts = dtm::build_tfm(docs, &filtered);
    let idf = match config.weighting {
        Weighting::Tfidf => Some(dtm::idf_weights(&counts)?),
        _ => None,
    };
    let weighted = weigh(&counts, config.weighting, idf.as_deref())?;
    let k = config.k_latent.min(weighted.rows()).min(weighted.cols());
    if k < config.k_latent {
        log::info!("k_latent {} capped at {k}", config.k_latent);
    }
    let factors = truncated_svd(&weighted, k)?;
    let projector = factors.projector();
    let rows = projector.project_rows(&weighted)?;
    Ok(FittedFeatures {
        model: FeatureModel {
            vocabulary: filtered,
            weighting: config.weighting,
            idf,
            projector,
        },
        factors,
        rows,
        full_vocabulary: vocab.len(),
    })
}

/// Labels of every document, or the id of the first unlabeled one.
pub fn require_labels(docs: &[RawDocument]) -> Result<Vec<String>> {
    let labels = docs
        .iter()
        .map(|d| {
            d.label
                .clone()
                .ok_or_else(|| PipelineError::Unlabeled(d.id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = labels.iter().collect::<BTreeSet<_>>().len();
    if classes < 2 {
        return Err(PipelineError::TooFewClasses(classes));
    }
    Ok(labels)
}

/// Trains the classifier on latent rows, leaving out documents that have
/// no selected term at all.
pub(crate) fn train_classifier(
    rows: &[Vec<f64>],
    labels: &[String],
    nonzero: &[bool],
    gamma: f64,
    nu: f64,
    config: &PipelineConfig,
) -> Result<MultiClassNuSvc> {
    let keep: Vec<usize> = (0..rows.len()).filter(|&i| nonzero[i]).collect();
    if keep.len() < rows.len() {
        log::warn!(
            "{} training documents have no selected terms and are left out",
            rows.len() - keep.len()
        );
    }
    let x: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();
    let y: Vec<String> = keep.iter().map(|&i| labels[i].clone()).collect();
    Ok(nusvm::train_multiclass(
        &x,
        &y,
        gamma,
        nu,
        config.balancing,
        &config.solver,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u32,
    pub scrub_rules: ScrubRules,
    pub features: FeatureModel,
    pub classifier: MultiClassNuSvc,
    pub config: PipelineConfig,
}

pub fn fit(docs: &[RawDocument], config: &PipelineConfig) -> Result<PipelineModel> {
    config.validate()?;
    let labels = require_labels(docs)?;
    let clean = corpus::preprocess_all(docs, &config.scrub_rules);
    let fitted = fit_features(&clean, &labels, config)?;
    let nonzero = nonzero_rows(&clean, &fitted.model);
    let classifier = train_classifier(
        &fitted.rows,
        &labels,
        &nonzero,
        config.gamma,
        config.nu,
        config,
    )?;
    Ok(PipelineModel {
        format_version: FORMAT_VERSION,
        scrub_rules: config.scrub_rules.clone(),
        features: fitted.model,
        classifier,
        config: config.clone(),
    })
}

pub(crate) fn nonzero_rows(docs: &[CleanDocument], features: &FeatureModel) -> Vec<bool> {
    docs.iter()
        .map(|d| {
            d.tokens
                .iter()
                .any(|t| features.vocabulary.index_of(t).is_some())
        })
        .collect()
}

impl PipelineModel {
    pub fn latent(&self, doc: &RawDocument) -> Vec<f64> {
        self.features
            .transform(&corpus::preprocess(doc, &self.scrub_rules))
    }

    pub fn predict_document(&self, doc: &RawDocument) -> Prediction {
        self.classifier
            .predict(&self.latent(doc))
            .expect("latent dimension matches the classifier")
    }

    fn check(&self) -> Result<()> {
        let f = &self.features;
        let bad = |m: String| Err(PipelineError::Inconsistent(m));
        if f.projector.vocab_size != f.vocabulary.len() {
            return bad(format!(
                "projector expects {} terms, vocabulary has {}",
                f.projector.vocab_size,
                f.vocabulary.len()
            ));
        }
        if f.projector.v.rows() != f.projector.vocab_size || f.projector.v.cols() != f.projector.k()
        {
            return bad("projector matrix shape does not match its singular values".into());
        }
        if self.classifier.dim != f.projector.k() {
            return bad(format!(
                "classifier expects dimension {}, projector yields {}",
                self.classifier.dim,
                f.projector.k()
            ));
        }
        match (&f.idf, f.weighting) {
            (Some(idf), Weighting::Tfidf) if idf.len() == f.vocabulary.len() => {}
            (None, w) if w != Weighting::Tfidf => {}
            _ => return bad("idf statistics do not match the weighting".into()),
        }
        for m in &self.classifier.binary_models {
            if m.support_vectors.len() != m.dual_coefs.len()
                || m.support_vectors
                    .iter()
                    .any(|s| s.len() != self.classifier.dim)
            {
                return bad(format!("binary model {:?} is malformed", m.classes));
            }
        }
        Ok(())
    }
}

pub fn predict_document(model: &PipelineModel, doc: &RawDocument) -> Prediction {
    model.predict_document(doc)
}

pub fn save_model(model: &PipelineModel, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(model).expect("model serializes");
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<PipelineModel> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_model(&text)
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u64>,
}

pub fn parse_model(text: &str) -> Result<PipelineModel> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    match probe.format_version {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(found) => {
            return Err(PipelineError::Version {
                found,
                expected: FORMAT_VERSION,
            })
        }
        None => {
            return Err(PipelineError::Parse {
                offset: 0,
                message: "missing format_version".into(),
            })
        }
    }
    let model: PipelineModel = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    model.check()?;
    Ok(model)
}

fn parse_error(text: &str, e: &serde_json::Error) -> PipelineError {
    PipelineError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

/// Byte offset of a 1-based (line, column) position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}
