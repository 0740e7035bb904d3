//! Text genre classification toolkit.
//!
//! The pipeline turns raw titles and descriptions into scrubbed, stemmed
//! token lists ([`corpus`]), builds sparse document-term matrices under a
//! chosen weighting ([`dtm`]), keeps only terms carrying enough mutual
//! information about some category ([`mi_filter`]), maps documents into a
//! truncated-SVD latent space ([`lsi`]) and classifies them with a
//! one-vs-one ensemble of ν-support-vector classifiers ([`nusvm`]).
//! [`pipeline`] composes the stages, runs stratified cross-validation and
//! (γ, ν) grid searches, and persists fitted models.

// Dense numerical kernels index several arrays in lockstep.
#![allow(clippy::needless_range_loop)]

pub mod corpus;
pub mod dtm;
pub mod linalg;
pub mod lsi;
pub mod mi_filter;
pub mod nusvm;
pub mod pipeline;

pub use corpus::{CleanDocument, RawDocument, ScrubRules, Vocabulary};
pub use dtm::{TermMatrix, Weighting};
pub use lsi::{LsiProjector, SvdFactors};
pub use mi_filter::{MiTable, SelectionRule};
pub use nusvm::{BalancingStrategy, BinaryNuSvc, MultiClassNuSvc};
pub use pipeline::{CvReport, GridReport, PipelineConfig, PipelineModel};
