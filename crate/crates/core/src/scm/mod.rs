//! Thought-language structural causal models.
//!
//! Latent "thought" variables follow a DAG with conditional probability
//! tables; each realized value is verbalized by a token drawn from its
//! expression set, and the tokens are written in one of several candidate
//! orders. Everything here is exact enumeration over small discrete models.

mod example;
mod expression;
mod file;
mod joint;
mod model;
mod query;
mod sample;

pub use example::{
    build_example_two_premise, random_row, singleton_tokens, xor_params, PremiseOrder,
    RandomConfig, RandomTwoPremise, TwoPremise, TwoPremiseParams,
};
pub use expression::{
    uniform_orderings, EmissionMode, ExpressionScheme, Ordering, TokenId, TokenWeight,
};
pub use file::{LoadedScm, OrderingSpec, QuerySpec, RoleSpec, ScmFile, VarRef};
pub use joint::{
    enumerate_joint, enumerate_joint_with_budget, enumeration_size, JointEntry, JointTable,
    DEFAULT_BUDGET, MASS_TOLERANCE,
};
pub use model::{Cpt, DiscreteScm, Variable, ROW_TOLERANCE};
pub use query::{
    conditional, evidence_mass, satisfies, Evidence, LatentConstraint, LatentQuery, Target,
};
pub use sample::{corpus_strings, sample_corpus, SampledSequence};

#[derive(Debug, thiserror::Error)]
pub enum ScmError {
    #[error("invalid SCM: {0}")]
    Invalid(String),
    #[error("the edge set contains a cycle")]
    Cyclic,
    #[error("CPT shape mismatch: {0}")]
    CptShape(String),
    #[error("CPT of `{variable}` row {row}: {why}")]
    CptRow {
        variable: String,
        row: usize,
        why: String,
    },
    #[error("invalid expression scheme: {0}")]
    Expression(String),
    #[error("token `{token}` is outside the expression set of `{variable}={value}`")]
    TokenOutsideExpression {
        token: String,
        variable: String,
        value: usize,
    },
    #[error("invalid ordering: {0}")]
    Ordering(String),
    #[error("enumeration needs {needed} cells, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("contradictory constraints: {0}")]
    Contradictory(String),
    #[error("unconditionable evidence: the evidence event has zero probability")]
    Unconditionable,
    #[error("not a two-premise SCM: {0}")]
    NotTwoPremise(String),
    #[error("{path}: {why}")]
    File { path: String, why: String },
}
