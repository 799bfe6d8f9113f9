//! Input/target layouts for self-rationalizing models.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::corpus::{Instance, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationalizationKind {
    Feb,
    Cot,
    Infilling,
    SquadT5,
    QaSimple,
    T5Like,
}

impl RationalizationKind {
    pub const ALL: [RationalizationKind; 6] = [
        RationalizationKind::Feb,
        RationalizationKind::Cot,
        RationalizationKind::Infilling,
        RationalizationKind::SquadT5,
        RationalizationKind::QaSimple,
        RationalizationKind::T5Like,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RationalizationKind::Feb => "feb",
            RationalizationKind::Cot => "cot",
            RationalizationKind::Infilling => "infilling",
            RationalizationKind::SquadT5 => "squad_t5",
            RationalizationKind::QaSimple => "qa_simple",
            RationalizationKind::T5Like => "t5_like",
        }
    }
}

impl fmt::Display for RationalizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RationalizationKind {
    type Err = PromptError;
    fn from_str(s: &str) -> Result<Self, PromptError> {
        let k = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == k)
            .ok_or_else(|| PromptError::UnsupportedKind(s.to_string()))
    }
}

const SLOTS: [&str; 5] = ["question", "choices", "answer", "rationale", "dataset"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalizationTemplate {
    pub kind: RationalizationKind,
    /// Joins the instance's choices in the `{choices}` slot.
    pub choice_separator: String,
    pub input: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rendered {
    pub input: String,
    pub target: String,
}

fn builtin_text(kind: RationalizationKind) -> &'static str {
    match kind {
        RationalizationKind::Feb => include_str!("../../templates/rationalization/feb.json"),
        RationalizationKind::Cot => include_str!("../../templates/rationalization/cot.json"),
        RationalizationKind::Infilling => include_str!("../../templates/rationalization/infilling.json"),
        RationalizationKind::SquadT5 => include_str!("../../templates/rationalization/squad_t5.json"),
        RationalizationKind::QaSimple => include_str!("../../templates/rationalization/qa_simple.json"),
        RationalizationKind::T5Like => include_str!("../../templates/rationalization/t5_like.json"),
    }
}

/// Substitutes `{slot}` placeholders in one left-to-right pass, so inserted
/// text is never re-expanded. Unknown braces are copied through.
fn fill(template: &str, value: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| value(&after[..close]).map(|v| (close, v))) {
            Some((close, v)) => {
                out.push_str(&v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn placeholders(t: &str) -> Vec<&str> {
    let mut v = Vec::new();
    let mut rest = t;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if after[..close].chars().all(|c| c.is_ascii_lowercase() || c == '_') => {
                v.push(&after[..close]);
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    v
}

impl RationalizationTemplate {
    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        let t: RationalizationTemplate =
            serde_json::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
        for slot in placeholders(&t.input).into_iter().chain(placeholders(&t.target)) {
            if !SLOTS.contains(&slot) {
                return Err(PromptError::Template(format!("unknown slot {{{slot}}} in {} template", t.kind)));
            }
        }
        Ok(t)
    }

    pub fn builtin(kind: RationalizationKind) -> Self {
        Self::from_json(builtin_text(kind)).expect("shipped template is valid")
    }

    /// Reads `<dir>/<kind>.json` when `dir` is given, else the shipped template.
    pub fn load(kind: RationalizationKind, dir: Option<&Path>) -> Result<Self, PromptError> {
        let Some(dir) = dir else {
            return Ok(Self::builtin(kind));
        };
        let path = dir.join(format!("{kind}.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    fn slot(&self, name: &str, question: &str, instance: &Instance, answer: &Label, rationale: &str) -> Option<String> {
        Some(match name {
            "question" => question.to_string(),
            "choices" => instance
                .choices
                .iter()
                .map(Label::as_str)
                .collect::<Vec<_>>()
                .join(&self.choice_separator),
            "answer" => answer.as_str().to_string(),
            "rationale" => rationale.to_string(),
            "dataset" => instance.dataset.to_string(),
            _ => return None,
        })
    }

    /// The model input with `question` in the question slot.
    pub fn render_input_with_question(&self, instance: &Instance, question: &str) -> String {
        fill(&self.input, |s| self.slot(s, question, instance, &instance.gold_label, ""))
    }

    /// Renders input and target; `answer` defaults to the gold label and `rationale` to empty.
    pub fn render(&self, instance: &Instance, answer: Option<&Label>, rationale: Option<&str>) -> Rendered {
        let answer = answer.unwrap_or(&instance.gold_label);
        let rationale = rationale.unwrap_or("");
        Rendered {
            input: fill(&self.input, |s| self.slot(s, &instance.question, instance, answer, rationale)),
            target: fill(&self.target, |s| self.slot(s, &instance.question, instance, answer, rationale)),
        }
    }
}

pub fn render_rationalization(
    instance: &Instance,
    answer: Option<&Label>,
    rationale: Option<&str>,
    template: &RationalizationTemplate,
) -> Rendered {
    template.render(instance, answer, rationale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Dataset;

    fn inst() -> Instance {
        Instance {
            id: "i1".into(),
            dataset: Dataset::Strategyqa,
            question: "Can a {rationale} fly?".into(),
            choices: vec!["Yes".into(), "No".into()],
            gold_label: "No".into(),
            gold_rationale: String::new(),
        }
    }

    #[test]
    fn answer_rationale_order() {
        let feb = RationalizationTemplate::builtin(RationalizationKind::Feb);
        let r = feb.render(&inst(), None, Some("Pigs lack wings."));
        assert!(r.target.find("No").unwrap() < r.target.find("Pigs").unwrap());
        let cot = RationalizationTemplate::builtin(RationalizationKind::Cot);
        let r = cot.render(&inst(), None, Some("Pigs lack wings."));
        assert!(r.target.find("Pigs").unwrap() < r.target.rfind("No").unwrap());
    }

    #[test]
    fn slot_text_is_not_reexpanded() {
        let t = RationalizationTemplate::builtin(RationalizationKind::QaSimple);
        let r = t.render(&inst(), None, Some("R"));
        assert_eq!(r.input, "question: Can a {rationale} fly?");
    }

    #[test]
    fn empty_rationale_infilling() {
        let t = RationalizationTemplate::builtin(RationalizationKind::Infilling);
        let r = t.render(&inst(), None, None);
        assert!(r.input.contains("<extra_id_0>"));
        assert_eq!(r.target, "<extra_id_0> No <extra_id_1> ");
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("FEB".parse::<RationalizationKind>().unwrap(), RationalizationKind::Feb);
        assert_eq!("squad-t5".parse::<RationalizationKind>().unwrap(), RationalizationKind::SquadT5);
        assert!(matches!("gpt".parse::<RationalizationKind>(), Err(PromptError::UnsupportedKind(_))));
        for k in RationalizationKind::ALL {
            assert_eq!(RationalizationTemplate::builtin(k).kind, k);
        }
        assert!(RationalizationTemplate::from_json(
            r#"{"kind":"feb","choice_separator":",","input":"{context}","target":""}"#
        )
        .is_err());
    }
}
