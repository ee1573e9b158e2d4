//! Sparse genetic network estimation from GWAS summary statistics.
//!
//! The pipeline estimates the estimation-error covariance of per-variant
//! Z-scores from null variants, subtracts it from a Pearson or robust
//! Spearman/MAD covariance of the significant variants, and fits a sparse
//! positive definite precision matrix by ADMM with an MCP (or lasso) penalty.
//! Tuning runs subsampled cross-validation followed by stability selection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod selection;
pub mod simulation;
pub mod solver;
pub mod stats;

pub use covariance::{CorrelationPipeline, ErrorCovariance, Estimator, GeneticCovariance, NullPanel, SummaryPanel};
pub use error::{Error, Result};
pub use ingest::GwasRecord;
pub use matrix::{EigenDecomposition, SymmetricMatrix};
pub use pipeline::{AnalysisConfig, NetworkReport};
pub use solver::{AdmmConfig, PenaltyFamily, PenaltySpec, PrecisionFit};
