//! Few-shot prompts for generalization questions, completion parsing, and
//! validation bookkeeping.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::corpus::{normalize_text, GenQuestion, GenType, Instance, Label, Record};
use crate::oracle::{GenerateRequest, Oracle};

pub const DEMOS_PER_TEMPLATE: usize = 6;

const REPHRASE_JSON: &str = include_str!("../../templates/genq/rephrase.json");
const COUNTERFACTUAL_JSON: &str = include_str!("../../templates/genq/counterfactual.json");
const SIMILAR_JSON: &str = include_str!("../../templates/genq/similar_reasoning.json");

/// Field names of one demonstration, in serialization order.
pub fn layout(gen_type: GenType) -> &'static [&'static str] {
    match gen_type {
        GenType::Rephrase => &["question", "rephrase", "answer"],
        GenType::Counterfactual => &["context", "question", "generate"],
        GenType::SimilarReasoning => &["context", "question", "generate", "answer"],
    }
}

/// The field the generator is asked to fill.
pub fn generation_field(gen_type: GenType) -> &'static str {
    match gen_type {
        GenType::Rephrase => "rephrase",
        _ => "generate",
    }
}

fn has_answer_field(gen_type: GenType) -> bool {
    layout(gen_type).contains(&"answer")
}

pub type Demo = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenTemplate {
    pub gen_type: GenType,
    pub instruction: String,
    pub demonstrations: Vec<Demo>,
}

impl GenTemplate {
    /// Checks every demonstration against the type's field layout. Any
    /// number of demonstrations is accepted here; shipped files carry six.
    pub fn new(gen_type: GenType, instruction: impl Into<String>, demonstrations: Vec<Demo>) -> Result<Self, PromptError> {
        let t = GenTemplate {
            gen_type,
            instruction: instruction.into(),
            demonstrations,
        };
        t.check_layout()?;
        Ok(t)
    }

    fn check_layout(&self) -> Result<(), PromptError> {
        let want: Vec<&str> = {
            let mut v = layout(self.gen_type).to_vec();
            v.sort_unstable();
            v
        };
        for (i, d) in self.demonstrations.iter().enumerate() {
            let got: Vec<&str> = d.keys().map(String::as_str).collect();
            if got != want {
                return Err(PromptError::Template(format!(
                    "{} demonstration {} has fields {got:?}, expected {want:?}",
                    self.gen_type, i
                )));
            }
        }
        Ok(())
    }

    /// Parses a template file; it must hold exactly six demonstrations.
    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        let t: GenTemplate = serde_json::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
        t.check_layout()?;
        if t.demonstrations.len() != DEMOS_PER_TEMPLATE {
            return Err(PromptError::Template(format!(
                "{} template has {} demonstrations, expected {DEMOS_PER_TEMPLATE}",
                t.gen_type,
                t.demonstrations.len()
            )));
        }
        Ok(t)
    }

    pub fn builtin(gen_type: GenType) -> Self {
        let text = match gen_type {
            GenType::Rephrase => REPHRASE_JSON,
            GenType::Counterfactual => COUNTERFACTUAL_JSON,
            GenType::SimilarReasoning => SIMILAR_JSON,
        };
        Self::from_json(text).expect("shipped template is valid")
    }

    /// Reads `<dir>/<gen_type>.json` when `dir` is given, else the shipped template.
    pub fn load(gen_type: GenType, dir: Option<&Path>) -> Result<Self, PromptError> {
        let Some(dir) = dir else {
            return Ok(Self::builtin(gen_type));
        };
        let path = dir.join(format!("{gen_type}.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let t = Self::from_json(&text)?;
        if t.gen_type != gen_type {
            return Err(PromptError::Template(format!(
                "{} declares gen_type {}",
                path.display(),
                t.gen_type
            )));
        }
        Ok(t)
    }
}

/// Keeps one field per line: backslashes and newlines are escaped.
fn escape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    for c in v.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

pub fn serialize_demo(gen_type: GenType, demo: &Demo) -> String {
    layout(gen_type)
        .iter()
        .map(|f| format!("{f}: {}", escape(demo.get(*f).map_or("", String::as_str))))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_demo(gen_type: GenType, text: &str) -> Result<Demo, PromptError> {
    let fields = layout(gen_type);
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != fields.len() {
        return Err(PromptError::Parse(format!(
            "expected {} lines, found {}",
            fields.len(),
            lines.len()
        )));
    }
    let mut demo = Demo::new();
    for (line, field) in lines.iter().zip(fields) {
        let rest = line
            .strip_prefix(field)
            .and_then(|r| r.strip_prefix(':'))
            .ok_or_else(|| PromptError::Parse(format!("line {line:?} does not start with {field}:")))?;
        let value = rest.strip_prefix(' ').unwrap_or(rest);
        demo.insert(field.to_string(), unescape(value));
    }
    Ok(demo)
}

/// Instruction, demonstrations, then the test instance with the generation field open.
pub fn build_genq_prompt(instance: &Instance, template: &GenTemplate) -> Result<String, PromptError> {
    if instance.question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion(instance.id.clone()));
    }
    let mut blocks = vec![template.instruction.clone()];
    blocks.extend(
        template
            .demonstrations
            .iter()
            .map(|d| serialize_demo(template.gen_type, d)),
    );
    let open = generation_field(template.gen_type);
    let test = match template.gen_type {
        GenType::Rephrase => format!("question: {}\n{open}:", escape(&instance.question)),
        _ => {
            if instance.gold_rationale.trim().is_empty() {
                return Err(PromptError::MissingContext(instance.id.clone()));
            }
            format!(
                "context: {}\nquestion: {}\n{open}:",
                escape(&instance.gold_rationale),
                escape(&instance.question)
            )
        }
    };
    blocks.push(test);
    Ok(blocks.join("\n\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenCandidate {
    pub id: String,
    pub parent_instance_id: String,
    pub gen_type: GenType,
    pub question: String,
    #[serde(default)]
    pub proposed_answer: Option<Label>,
    pub raw_completion: String,
}

impl Record for GenCandidate {
    fn check(&self) -> Result<(), String> {
        if self.question.trim().is_empty() {
            return Err(format!("candidate {} has an empty question", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedCompletion {
    pub index: usize,
    pub raw_completion: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedCompletions {
    pub candidates: Vec<GenCandidate>,
    pub rejects: Vec<RejectedCompletion>,
    /// Completions dropped because their question repeated an earlier one.
    pub duplicates: usize,
}

/// Dedup key: NFC, lowercase, whitespace collapsed.
pub fn question_key(q: &str) -> String {
    normalize_text(q)
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Maps a raw answer onto the parent's label vocabulary; `True`/`False` become `Yes`/`No`.
pub fn normalize_answer(raw: &str, parent: &Instance) -> Option<Label> {
    let a = raw.trim().trim_end_matches('.').trim();
    if a.is_empty() {
        return None;
    }
    let yes = Label::new("Yes");
    let no = Label::new("No");
    let yes_no = parent.has_choice(&yes) && parent.has_choice(&no);
    match a.to_lowercase().as_str() {
        "true" if yes_no => Some(yes),
        "false" if yes_no => Some(no),
        _ => Some(Label::new(a)),
    }
}

fn parse_one(raw: &str, gen_type: GenType) -> Result<(String, Option<String>), &'static str> {
    let marker = format!("{}:", generation_field(gen_type));
    let start = raw.find(&marker).ok_or("missing field")?;
    let mut rest = &raw[start + marker.len()..];
    if let Some(end) = rest.find("\n\n") {
        rest = &rest[..end];
    }
    let (q_part, answer) = match rest.find("answer:").filter(|_| has_answer_field(gen_type)) {
        Some(i) => {
            let a = rest[i + "answer:".len()..].lines().next().unwrap_or("").trim();
            (&rest[..i], (!a.is_empty()).then(|| a.to_string()))
        }
        None => (rest, None),
    };
    let question = q_part.lines().next().unwrap_or("").trim();
    if question.is_empty() {
        return Err("empty question");
    }
    Ok((question.to_string(), answer))
}

/// Extracts candidates, dropping repeated questions and keeping first-seen order.
///
/// Rephrase candidates without a parsed answer default to the parent's gold
/// label; counterfactual candidates never carry an answer.
pub fn parse_genq_completions<S: AsRef<str>>(raw: &[S], gen_type: GenType, parent: &Instance) -> ParsedCompletions {
    let mut out = ParsedCompletions::default();
    let mut seen = HashSet::new();
    for (index, r) in raw.iter().enumerate() {
        let r = r.as_ref();
        match parse_one(r, gen_type) {
            Err(reason) => out.rejects.push(RejectedCompletion {
                index,
                raw_completion: r.to_string(),
                reason: reason.to_string(),
            }),
            Ok((question, answer)) => {
                if !seen.insert(question_key(&question)) {
                    out.duplicates += 1;
                    continue;
                }
                let proposed_answer = match gen_type {
                    GenType::Counterfactual => None,
                    GenType::Rephrase => answer
                        .and_then(|a| normalize_answer(&a, parent))
                        .or_else(|| Some(parent.gold_label.clone())),
                    GenType::SimilarReasoning => answer.and_then(|a| normalize_answer(&a, parent)),
                };
                out.candidates.push(GenCandidate {
                    id: format!("{}-{}-{}", parent.id, gen_type, out.candidates.len()),
                    parent_instance_id: parent.id.clone(),
                    gen_type,
                    question,
                    proposed_answer,
                    raw_completion: r.to_string(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub n: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            n: 5,
            temperature: 0.7,
            top_p: 1.0,
            max_tokens: 64,
            seed: None,
        }
    }
}

/// One audit-log line: the prompt, request parameters, and raw completions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub instance_id: String,
    pub gen_type: GenType,
    pub request: GenerateRequest,
    pub completions: Vec<String>,
}

impl Record for AuditRecord {}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub parsed: ParsedCompletions,
    pub audit: AuditRecord,
    pub warnings: Vec<String>,
}

/// One generation request for `cfg.n` completions, parsed into candidates.
pub fn generate_gen_questions(
    instance: &Instance,
    template: &GenTemplate,
    generator: &dyn Oracle,
    cfg: &GenerationConfig,
) -> Result<GenerationOutcome, PromptError> {
    let prompt = build_genq_prompt(instance, template)?;
    let request = GenerateRequest {
        prompt,
        n: cfg.n,
        temperature: cfg.temperature,
        top_p: cfg.top_p,
        max_tokens: cfg.max_tokens,
        seed: cfg.seed,
    };
    let completions = generator.generate(&request).map_err(PromptError::Oracle)?;
    let mut warnings = Vec::new();
    if completions.is_empty() {
        warnings.push(format!("generator returned no completions for {}", instance.id));
    }
    let audit = AuditRecord {
        instance_id: instance.id.clone(),
        gen_type: template.gen_type,
        request,
        completions,
    };
    Ok(GenerationOutcome {
        parsed: parse_audit(&audit, instance),
        audit,
        warnings,
    })
}

/// Parses the completions of a logged request.
pub fn parse_audit(audit: &AuditRecord, parent: &Instance) -> ParsedCompletions {
    let marker = format!("{}:", generation_field(audit.gen_type));
    // The prompt ends on the open marker, so completions normally continue after it.
    let reopened: Vec<String> = audit
        .completions
        .iter()
        .map(|c| {
            if c.trim_start().starts_with(&marker) {
                c.clone()
            } else {
                format!("{marker}{c}")
            }
        })
        .collect();
    parse_genq_completions(&reopened, audit.gen_type, parent)
}

/// Generates for many instances with bounded concurrency; output follows input order.
pub fn generate_many(
    jobs: &[(&Instance, &GenTemplate)],
    generator: &dyn Oracle,
    cfg: &GenerationConfig,
    max_in_flight: usize,
) -> Vec<Result<GenerationOutcome, PromptError>> {
    crate::oracle::map_bounded(jobs, max_in_flight, |(i, t)| generate_gen_questions(i, t, generator, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub candidate_id: String,
    pub validator_id: String,
    pub valid: bool,
    #[serde(default)]
    pub answer: Option<Label>,
}

impl Record for Verdict {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum ValidationRejection {
    NoVerdicts,
    NotValid { valid: usize, total: usize },
    AnswerDisagreement { counts: BTreeMap<String, usize> },
}

/// Accepts a candidate when a strict majority (and at least two) of the
/// verdicts call it valid and a strict majority of those agree on one answer.
pub fn record_validation(candidate: &GenCandidate, verdicts: &[Verdict]) -> Result<GenQuestion, ValidationRejection> {
    if verdicts.is_empty() {
        return Err(ValidationRejection::NoVerdicts);
    }
    let valid: Vec<&Verdict> = verdicts.iter().filter(|v| v.valid).collect();
    if 2 * valid.len() <= verdicts.len() || valid.len() < 2 {
        return Err(ValidationRejection::NotValid {
            valid: valid.len(),
            total: verdicts.len(),
        });
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for v in &valid {
        let key = v.answer.as_ref().map_or_else(String::new, |a| a.as_str().to_string());
        *counts.entry(key).or_default() += 1;
    }
    let winner = counts
        .iter()
        .find(|(a, c)| !a.is_empty() && 2 * **c > valid.len())
        .map(|(a, _)| a.clone());
    match winner {
        Some(answer) => Ok(GenQuestion {
            id: candidate.id.clone(),
            parent_instance_id: candidate.parent_instance_id.clone(),
            gen_type: candidate.gen_type,
            question: candidate.question.clone(),
            gold_label: Label::new(answer),
            validated: true,
            validation_votes: valid.len() as u32,
        }),
        None => Err(ValidationRejection::AnswerDisagreement { counts }),
    }
}
