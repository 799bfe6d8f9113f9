use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// NFC-normalized, whitespace-trimmed text. All label comparisons go through this.
pub fn normalize_text(s: &str) -> String {
    s.trim().nfc().collect()
}

/// A class label. Construction normalizes so that equality is exact string equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct Label(String);

impl Label {
    pub fn new(s: impl AsRef<str>) -> Self {
        Label(normalize_text(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::new(s)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl From<Label> for String {
    fn from(l: Label) -> Self {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Strategyqa,
    Obqa,
    Custom,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Strategyqa => "strategyqa",
            Dataset::Obqa => "obqa",
            Dataset::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenType {
    Rephrase,
    Counterfactual,
    SimilarReasoning,
}

impl GenType {
    pub const ALL: [GenType; 3] = [
        GenType::Rephrase,
        GenType::Counterfactual,
        GenType::SimilarReasoning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GenType::Rephrase => "rephrase",
            GenType::Counterfactual => "counterfactual",
            GenType::SimilarReasoning => "similar_reasoning",
        }
    }
}

impl fmt::Display for GenType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GenType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rephrase" => Ok(GenType::Rephrase),
            "counterfactual" => Ok(GenType::Counterfactual),
            "similar_reasoning" | "similar" => Ok(GenType::SimilarReasoning),
            other => Err(format!("unknown generalization type {other:?}")),
        }
    }
}

/// Which prediction oracle produced a label: question only, or question plus rationale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OracleKind {
    I,
    IR,
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::I => "I",
            OracleKind::IR => "IR",
        })
    }
}

/// The eight binary rationale properties, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Grammaticality,
    Validity,
    Coherence,
    Conciseness,
    Leakage,
    Novelty,
    Association,
    Contrast,
}

impl Property {
    pub const ALL: [Property; 8] = [
        Property::Grammaticality,
        Property::Validity,
        Property::Coherence,
        Property::Conciseness,
        Property::Leakage,
        Property::Novelty,
        Property::Association,
        Property::Contrast,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::Grammaticality => "grammaticality",
            Property::Validity => "validity",
            Property::Coherence => "coherence",
            Property::Conciseness => "conciseness",
            Property::Leakage => "leakage",
            Property::Novelty => "novelty",
            Property::Association => "association",
            Property::Contrast => "contrast",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Property::ALL
            .into_iter()
            .find(|p| p.name() == lower)
            .ok_or_else(|| format!("unknown property {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub id: String,
    pub dataset: Dataset,
    pub question: String,
    pub choices: Vec<Label>,
    pub gold_label: Label,
    #[serde(default)]
    pub gold_rationale: String,
}

impl Instance {
    pub fn has_choice(&self, label: &Label) -> bool {
        self.choices.contains(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOutput {
    pub instance_id: String,
    pub model_id: String,
    pub predicted_label: Label,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_to_gold: Option<f64>,
}

/// One annotator's answers before and after seeing the rationale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub instance_id: String,
    pub model_id: String,
    pub worker_id: String,
    pub pre_answer: Label,
    pub post_answer: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyRecord {
    pub instance_id: String,
    pub model_id: String,
    pub worker_id: String,
    pub grammaticality: bool,
    pub validity: bool,
    pub coherence: bool,
    pub conciseness: bool,
    pub leakage: bool,
    pub novelty: bool,
    pub association: bool,
    pub contrast: bool,
}

impl PropertyRecord {
    /// Property values in canonical [`Property::ALL`] order.
    pub fn values(&self) -> [bool; 8] {
        [
            self.grammaticality,
            self.validity,
            self.coherence,
            self.conciseness,
            self.leakage,
            self.novelty,
            self.association,
            self.contrast,
        ]
    }

    pub fn get(&self, p: Property) -> bool {
        self.values()[p.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenQuestion {
    pub id: String,
    pub parent_instance_id: String,
    pub gen_type: GenType,
    pub question: String,
    pub gold_label: Label,
    pub validated: bool,
    pub validation_votes: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OraclePrediction {
    pub gen_question_id: String,
    pub oracle_kind: OracleKind,
    pub predicted_label: Label,
}

/// Human answers to a generalization question, before and after the annotator
/// saw the parent question's rationale from `model_id` (`"gold"` for gold rationales).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenAnnotationRecord {
    pub gen_question_id: String,
    pub model_id: String,
    pub worker_id: String,
    pub pre_answer: Label,
    pub post_answer: Label,
}
