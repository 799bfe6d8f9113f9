//! Measure how much free-text rationales help people answer questions, and
//! build the data side of utility-driven rationale training.

pub mod agreement;
pub mod assoc;
pub mod cli;
pub mod corpus;
pub mod genu;
pub mod glmm;
pub mod oracle;
pub mod prompts;
pub mod quarkpool;
pub mod report;
pub mod utility;
