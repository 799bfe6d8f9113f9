use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::records::*;
use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecordKind {
    Instances,
    ModelOutputs,
    Annotations,
    PropertyAnnotations,
    GenQuestions,
    OraclePredictions,
    GenAnnotations,
}

impl RecordKind {
    pub fn name(self) -> &'static str {
        match self {
            RecordKind::Instances => "instances",
            RecordKind::ModelOutputs => "model_outputs",
            RecordKind::Annotations => "annotations",
            RecordKind::PropertyAnnotations => "property_annotations",
            RecordKind::GenQuestions => "gen_questions",
            RecordKind::OraclePredictions => "oracle_predictions",
            RecordKind::GenAnnotations => "gen_annotations",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A line-delimited record type with per-record field checks.
pub trait Record: Serialize + DeserializeOwned {
    /// Checks that only need the record itself. Cross-record checks live in `validate_corpus`.
    fn check(&self) -> Result<(), String> {
        Ok(())
    }
}

fn non_empty(field: &str, value: &str) -> Result<(), String> {
    if value.trim().is_empty() {
        Err(format!("{field} must be non-empty"))
    } else {
        Ok(())
    }
}

impl Record for Instance {
    fn check(&self) -> Result<(), String> {
        non_empty("id", &self.id)?;
        if self.choices.len() < 2 {
            return Err(format!("instance {} has fewer than 2 choices", self.id));
        }
        for (i, a) in self.choices.iter().enumerate() {
            if self.choices[..i].contains(a) {
                return Err(format!("instance {} has duplicate choice {a:?}", self.id));
            }
        }
        if !self.has_choice(&self.gold_label) {
            return Err(format!(
                "gold_label {:?} not in choices of instance {}",
                self.gold_label.as_str(),
                self.id
            ));
        }
        Ok(())
    }
}

impl Record for ModelOutput {
    fn check(&self) -> Result<(), String> {
        non_empty("instance_id", &self.instance_id)?;
        non_empty("model_id", &self.model_id)?;
        if let Some(s) = self.similarity_to_gold {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("similarity_to_gold {s} outside [0,1]"));
            }
        }
        Ok(())
    }
}

impl Record for AnnotationRecord {
    fn check(&self) -> Result<(), String> {
        non_empty("instance_id", &self.instance_id)?;
        non_empty("model_id", &self.model_id)?;
        non_empty("worker_id", &self.worker_id)
    }
}

impl Record for PropertyRecord {
    fn check(&self) -> Result<(), String> {
        non_empty("instance_id", &self.instance_id)?;
        non_empty("model_id", &self.model_id)?;
        non_empty("worker_id", &self.worker_id)
    }
}

impl Record for GenQuestion {
    fn check(&self) -> Result<(), String> {
        non_empty("id", &self.id)?;
        non_empty("question", &self.question)?;
        if self.validated && self.validation_votes < 2 {
            return Err(format!(
                "gen question {} is validated with only {} votes",
                self.id, self.validation_votes
            ));
        }
        Ok(())
    }
}

impl Record for OraclePrediction {}

impl Record for GenAnnotationRecord {
    fn check(&self) -> Result<(), String> {
        non_empty("gen_question_id", &self.gen_question_id)?;
        non_empty("worker_id", &self.worker_id)
    }
}

/// Reads one record per line. Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_jsonl<T: Record>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(BufReader::new(file), path)
}

pub fn parse_jsonl<T: Record, R: BufRead>(reader: R, path: &Path) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        record.check().map_err(|message| CorpusError::Schema {
            path: path.to_path_buf(),
            line: line_no,
            message,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_jsonl(BufWriter::new(file), records).map_err(io_err)
}

/// Records of any kind, as returned by [`load_records`].
#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Instances(Vec<Instance>),
    ModelOutputs(Vec<ModelOutput>),
    Annotations(Vec<AnnotationRecord>),
    PropertyAnnotations(Vec<PropertyRecord>),
    GenQuestions(Vec<GenQuestion>),
    OraclePredictions(Vec<OraclePrediction>),
    GenAnnotations(Vec<GenAnnotationRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Instances(v) => v.len(),
            Records::ModelOutputs(v) => v.len(),
            Records::Annotations(v) => v.len(),
            Records::PropertyAnnotations(v) => v.len(),
            Records::GenQuestions(v) => v.len(),
            Records::OraclePredictions(v) => v.len(),
            Records::GenAnnotations(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_records(kind: RecordKind, path: impl Into<PathBuf>) -> Result<Records, CorpusError> {
    let path = path.into();
    Ok(match kind {
        RecordKind::Instances => Records::Instances(read_jsonl(&path)?),
        RecordKind::ModelOutputs => Records::ModelOutputs(read_jsonl(&path)?),
        RecordKind::Annotations => Records::Annotations(read_jsonl(&path)?),
        RecordKind::PropertyAnnotations => Records::PropertyAnnotations(read_jsonl(&path)?),
        RecordKind::GenQuestions => Records::GenQuestions(read_jsonl(&path)?),
        RecordKind::OraclePredictions => Records::OraclePredictions(read_jsonl(&path)?),
        RecordKind::GenAnnotations => Records::GenAnnotations(read_jsonl(&path)?),
    })
}
