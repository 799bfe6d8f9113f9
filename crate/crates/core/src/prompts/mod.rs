//! Prompt rendering and parsing: generalization-question prompts and
//! self-rationalization templates. Templates ship as JSON under `templates/`
//! and can be replaced at run time.

mod genq;
mod rationalization;

use thiserror::Error;

use crate::oracle::OracleError;

pub use genq::{
    build_genq_prompt, generate_gen_questions, generate_many, generation_field, layout,
    normalize_answer, parse_audit, parse_demo, parse_genq_completions, question_key, record_validation,
    serialize_demo, AuditRecord, Demo, GenCandidate, GenTemplate, GenerationConfig,
    GenerationOutcome, ParsedCompletions, RejectedCompletion, ValidationRejection, Verdict,
    DEMOS_PER_TEMPLATE,
};
pub use rationalization::{
    render_rationalization, RationalizationKind, RationalizationTemplate, Rendered,
};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("instance {0} has an empty question")]
    EmptyQuestion(String),
    #[error("instance {0} has no gold rationale to use as context")]
    MissingContext(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("cannot parse demonstration: {0}")]
    Parse(String),
    #[error("unsupported rationalization template {0:?}")]
    UnsupportedKind(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Oracle(OracleError),
}
