//! Mixed-effects logistic regression of post-rationale correctness on
//! rationale properties.

mod design;
mod laplace;
mod optim;
mod quadrature;
mod tables;

use thiserror::Error;

pub use design::{
    build_design, design_from_observations, interaction_column, main_column, property_column_names,
    property_row, Aggregation, BuiltDesign, DesignMatrix, GroupFactor, PropertyObservation,
    FACTOR_HUMAN_PRIOR, FACTOR_MODEL, FACTOR_QUESTION, INTERCEPT, N_PROPERTIES, N_PROPERTY_COLUMNS,
};
pub use laplace::{
    conditional_loglik, fit_glmm, laplace_loglik, n_random_effects, penalized_gradient,
    penalized_objective, FitConfig, FittedGlmm,
};
pub use optim::{nelder_mead_bounded, NmOptions, NmResult};
pub use quadrature::{gauss_hermite, loglik_quadrature_oracle, MAX_LEVELS, MIN_NODES};
pub use tables::{
    best_combinations, combination_log_odds, combination_log_odds_by_name, marginal_log_odds,
    marginal_table, parse_property, render_combinations, render_marginal, top_pairwise,
    CombinationRow, MarginalRow,
};

#[derive(Debug, Error)]
pub enum GlmmError {
    #[error("design has no observations")]
    EmptyDesign,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown grouping factor {0:?}")]
    UnknownFactor(String),
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
    #[error("quadrature oracle needs exactly one grouping factor, got {0}")]
    MoreThanOneFactor(usize),
    #[error("quadrature oracle supports at most 10 levels, got {0}")]
    TooManyLevels(usize),
    #[error("Newton system is singular")]
    Singular,
    #[error("non-finite value during fitting")]
    NonFinite,
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing property annotation for {0}")]
    MissingProperty(String),
}
