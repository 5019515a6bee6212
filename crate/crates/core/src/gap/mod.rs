//! Shortcut distributions, the KL gap under imperfect understanding, and
//! count-based next-token predictors fitted to sampled corpora.

mod demo;
mod distribution;
mod explicitness;
mod ntp;
mod posterior;
mod property;
mod theorem;

pub use demo::{demo_bias, BiasDemo, DemoPair, DemoRow};
pub use distribution::{
    kl_divergence, max_abs_diff, total_variation, variational_distance, Distribution,
    DIST_TOLERANCE,
};
pub use explicitness::{l_explicitness_score, q_explicitness_score};
pub use ntp::{fit_tabular_ntp, TabularNtp};
pub use posterior::{shortcut_distribution, topological_posterior};
pub use property::{
    run_fixture_trial, run_random_trial, run_random_trials, trials_table, write_trials_csv,
    TrialConfig, TrialOutcome, TrialStatus, TrialSummary, IDENTITY_TOLERANCE, SLACK_TOLERANCE,
};
pub use theorem::{decomposition_check, theorem1_report, Decomposition, GapQuery, GapReport};

use crate::scm::ScmError;

#[derive(Debug, thiserror::Error)]
pub enum GapError {
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("infinite divergence: q assigns zero mass to `{0}`")]
    InfiniteDivergence(String),
    #[error("the evidence has zero probability")]
    ZeroEvidence,
    #[error("{0}")]
    Ordering(String),
    #[error("invalid query: {0}")]
    Query(String),
    #[error("next-token predictor: {0}")]
    Ntp(String),
    #[error("prefix `{0}` never occurs in the corpus")]
    UnseenPrefix(String),
    #[error(transparent)]
    Scm(ScmError),
    #[error("writing trial table: {0}")]
    Output(String),
}

impl From<ScmError> for GapError {
    fn from(e: ScmError) -> Self {
        match e {
            ScmError::Unconditionable => GapError::ZeroEvidence,
            other => GapError::Scm(other),
        }
    }
}
