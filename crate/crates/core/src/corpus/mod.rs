//! Data model, line-delimited record IO, and referential-integrity checks.
//!
//! Every pipeline stage reads and writes the record files defined here. Each
//! file holds one JSON object per line with a fixed set of field names;
//! unknown fields are rejected at load time.

mod io;
mod join;
mod records;
mod validate;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use io::{
    load_records, parse_jsonl, read_jsonl, save_records, write_jsonl, Record, RecordKind, Records,
};
pub use join::{join_evaluation_rows, EvaluationRow, JoinReport};
pub use records::*;
pub use validate::{validate_corpus, ValidationReport, Violation, ViolationKind, Warning};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: malformed record: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}:{line}: schema violation: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl CorpusError {
    pub fn is_io(&self) -> bool {
        matches!(self, CorpusError::Io { .. })
    }
}

/// All record collections of one evaluation run. Collections that a stage does
/// not use may be left empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub instances: Vec<Instance>,
    pub outputs: Vec<ModelOutput>,
    pub annotations: Vec<AnnotationRecord>,
    pub properties: Vec<PropertyRecord>,
    pub gen_questions: Vec<GenQuestion>,
    pub oracle_predictions: Vec<OraclePrediction>,
    pub gen_annotations: Vec<GenAnnotationRecord>,
}

impl Corpus {
    /// Standard file name for each record kind inside a corpus directory.
    pub fn file_name(kind: RecordKind) -> String {
        format!("{}.jsonl", kind.name())
    }

    /// Loads every standard file that exists in `dir`; missing files give empty collections.
    pub fn load_dir(dir: &Path) -> Result<Corpus, CorpusError> {
        if !dir.is_dir() {
            return Err(CorpusError::Io {
                path: dir.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            });
        }
        fn opt<T: Record>(dir: &Path, kind: RecordKind) -> Result<Vec<T>, CorpusError> {
            let p = dir.join(Corpus::file_name(kind));
            if p.exists() {
                read_jsonl(&p)
            } else {
                Ok(Vec::new())
            }
        }
        Ok(Corpus {
            instances: opt(dir, RecordKind::Instances)?,
            outputs: opt(dir, RecordKind::ModelOutputs)?,
            annotations: opt(dir, RecordKind::Annotations)?,
            properties: opt(dir, RecordKind::PropertyAnnotations)?,
            gen_questions: opt(dir, RecordKind::GenQuestions)?,
            oracle_predictions: opt(dir, RecordKind::OraclePredictions)?,
            gen_annotations: opt(dir, RecordKind::GenAnnotations)?,
        })
    }

    pub fn instance_index(&self) -> std::collections::HashMap<&str, &Instance> {
        self.instances.iter().map(|i| (i.id.as_str(), i)).collect()
    }
}
