//! Posterior inference on the necessary/random labelling: priors and
//! proposals, pseudo-likelihood fits of the auxiliary density, the MiSeal
//! sampler and label dependence summaries.

use thiserror::Error;

use crate::point_process::PointProcessError;

pub mod chain;
pub mod dependence;
pub mod mple;
pub mod priors;

pub use chain::{
    log_aux_hastings_ratio, log_flip_ratio, run_miseal, sample_labels_fixed_theta, AcceptanceStats,
    AuxState, HatMean, LabelFrequencies, MoveStats, PatternStats, PosteriorTrace, Schedule, TraceRecord,
    UpdateKind,
};
pub use dependence::{label_dependence_report, ContingencyTable, DependenceReport};
pub use mple::{mple_fit, MpleFit, MpleQuadrature};
pub use priors::{
    gibbs_update_lambda, label_log_odds, labels_feasible, log_prior_ratio, log_theta_prior_ratio,
    propose_beta_gamma, Priors, ProposalSettings, Theta,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("the observed pattern is empty")]
    EmptyPattern,
    #[error("the trend integrates to zero over the region")]
    DegenerateTrend,
    #[error("a label is constant across the samples")]
    DegenerateMarginal,
    #[error("auxiliary sampler failed: {0}")]
    AuxSamplerFailure(String),
    #[error("label index {0} out of range")]
    IndexOutOfRange(usize),
    #[error(transparent)]
    PointProcess(#[from] PointProcessError),
}
