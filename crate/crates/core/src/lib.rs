//! Bayesian variable selection for Gaussian linear models.
//!
//! The crate scores every model `M_A` (a subset of the tested covariates) by
//! its posterior odds against the base model, using
//!
//! - mixtures of g-priors on the regression parameters (intrinsic or
//!   Zellner–Siow), integrated numerically in [`evidence`];
//! - exchangeable model-space priors in [`priors`], including the children
//!   and descendant constructions whose size prior tends to a Poisson law;
//! - a deterministic greedy tree search with pruning in [`search`] that visits
//!   each model at most once.
//!
//! [`design`] holds the regression data and the least-squares kernels,
//! [`datasets`] handles CSV ingestion, correlated augmentation and synthetic
//! data, and [`cli`] drives batch runs and renders reports.

pub mod cli;
pub mod datasets;
pub mod design;
pub mod error;
pub mod evidence;
pub mod math;
pub mod priors;
pub mod search;

pub use design::{DesignData, FitState, ModelKey, SsDecomposition};
pub use error::{Error, ErrorCategory, Result};
pub use evidence::{QuadratureRule, WPriorFamily, WPriorSpec};
pub use priors::{BetaMode, PriorSpec, SizeDistribution};
pub use search::{EvidenceEngine, EvidenceRecord, PruneRule, SearchLimits, SearchReport};
