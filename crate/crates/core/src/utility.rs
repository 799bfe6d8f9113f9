//! Human utility of rationales.
//!
//! Annotators answer each question twice: before and after seeing the
//! rationale. Their answers are aggregated per (instance, model) by majority
//! vote, and the pair of aggregated answers decides the utility label:
//!
//! | before      | after       | label        |
//! |-------------|-------------|--------------|
//! | wrong       | right       | `Useful`     |
//! | any         | wrong       | `NotUseful`  |
//! | right       | right       | `Unsure`     |
//!
//! A vote without a strict plurality winner counts as wrong.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    EvaluationRow, GenAnnotationRecord, GenQuestion, GenType, Instance, Label, ModelOutput,
};
use crate::report::{fmt_fixed, Table};

#[derive(Debug, Error, PartialEq)]
pub enum UtilityError {
    #[error("majority vote over an empty answer list")]
    EmptyVote,
    #[error("answer {0:?} is not one of the choices")]
    OutOfDomain(String),
    #[error("no classified instances")]
    EmptyCorpus,
    #[error("no model outputs")]
    NoOutputs,
    #[error("model output for unknown instance {0}")]
    UnknownInstance(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteResult {
    pub winner: Option<Label>,
    pub counts: BTreeMap<Label, usize>,
    pub no_majority: bool,
}

impl VoteResult {
    pub fn is_correct(&self, gold: &Label) -> bool {
        self.winner.as_ref() == Some(gold)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Strict-plurality vote. Ties on the top count set `no_majority`.
pub fn majority_vote(answers: &[Label], choices: &[Label]) -> Result<VoteResult, UtilityError> {
    if answers.is_empty() {
        return Err(UtilityError::EmptyVote);
    }
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for a in answers {
        if !choices.contains(a) {
            return Err(UtilityError::OutOfDomain(a.as_str().to_string()));
        }
        *counts.entry(a.clone()).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let mut leaders = counts.iter().filter(|(_, &c)| c == top);
    let first = leaders.next().map(|(l, _)| l.clone());
    let no_majority = leaders.next().is_some();
    Ok(VoteResult {
        winner: if no_majority { None } else { first },
        counts,
        no_majority,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityLabel {
    Useful,
    NotUseful,
    Unsure,
}

impl UtilityLabel {
    pub const ALL: [UtilityLabel; 3] = [
        UtilityLabel::Useful,
        UtilityLabel::NotUseful,
        UtilityLabel::Unsure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UtilityLabel::Useful => "useful",
            UtilityLabel::NotUseful => "not_useful",
            UtilityLabel::Unsure => "unsure",
        }
    }
}

impl fmt::Display for UtilityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_utility(pre: &VoteResult, post: &VoteResult, gold: &Label) -> UtilityLabel {
    classify_correctness(pre.is_correct(gold), post.is_correct(gold))
}

pub fn classify_correctness(pre_correct: bool, post_correct: bool) -> UtilityLabel {
    match (pre_correct, post_correct) {
        (_, false) => UtilityLabel::NotUseful,
        (false, true) => UtilityLabel::Useful,
        (true, true) => UtilityLabel::Unsure,
    }
}

/// Utility classification of one (instance, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifiedPair {
    pub instance_id: String,
    pub model_id: String,
    pub dataset: String,
    pub label: UtilityLabel,
    pub pre: VoteResult,
    pub post: VoteResult,
    pub n_annotators: usize,
    /// Fewer annotators than the configured pool size.
    pub underfilled: bool,
    /// Either vote had no strict plurality winner.
    pub tie: bool,
}

/// Groups evaluation rows by (instance, model) and classifies each group.
/// Output is ordered by (instance_id, model_id).
pub fn classify_pairs(
    rows: &[EvaluationRow<'_>],
    pool_size: usize,
) -> Result<Vec<ClassifiedPair>, UtilityError> {
    let mut groups: BTreeMap<(&str, &str), Vec<&EvaluationRow<'_>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((
                r.annotation.instance_id.as_str(),
                r.annotation.model_id.as_str(),
            ))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((iid, mid), g)| {
            let inst = g[0].instance;
            let pre: Vec<Label> = g.iter().map(|r| r.annotation.pre_answer.clone()).collect();
            let post: Vec<Label> = g.iter().map(|r| r.annotation.post_answer.clone()).collect();
            let pre = majority_vote(&pre, &inst.choices)?;
            let post = majority_vote(&post, &inst.choices)?;
            let label = classify_utility(&pre, &post, &inst.gold_label);
            Ok(ClassifiedPair {
                instance_id: iid.to_string(),
                model_id: mid.to_string(),
                dataset: inst.dataset.to_string(),
                label,
                tie: pre.no_majority || post.no_majority,
                pre,
                post,
                n_annotators: g.len(),
                underfilled: g.len() < pool_size,
            })
        })
        .collect()
}

pub fn utility_labels(pairs: &[ClassifiedPair]) -> HashMap<(String, String), UtilityLabel> {
    pairs
        .iter()
        .map(|p| ((p.instance_id.clone(), p.model_id.clone()), p.label))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityDistribution {
    pub model_id: String,
    pub dataset: String,
    pub pct_useful: f64,
    pub pct_not_useful: f64,
    pub pct_unsure: f64,
    pub n: usize,
    pub n_useful: usize,
    pub n_not_useful: usize,
    pub n_unsure: usize,
    pub n_underfilled: usize,
    pub n_ties: usize,
}

/// Percentage of each utility label per (model, dataset), ordered by (model, dataset).
pub fn utility_distribution(
    pairs: &[ClassifiedPair],
) -> Result<Vec<UtilityDistribution>, UtilityError> {
    if pairs.is_empty() {
        return Err(UtilityError::EmptyCorpus);
    }
    let mut by: BTreeMap<(&str, &str), [usize; 5]> = BTreeMap::new();
    for p in pairs {
        let c = by
            .entry((p.model_id.as_str(), p.dataset.as_str()))
            .or_default();
        c[match p.label {
            UtilityLabel::Useful => 0,
            UtilityLabel::NotUseful => 1,
            UtilityLabel::Unsure => 2,
        }] += 1;
        c[3] += p.underfilled as usize;
        c[4] += p.tie as usize;
    }
    Ok(by
        .into_iter()
        .map(|((model, dataset), c)| {
            let n = c[0] + c[1] + c[2];
            let pct = |k: usize| 100.0 * k as f64 / n as f64;
            UtilityDistribution {
                model_id: model.to_string(),
                dataset: dataset.to_string(),
                pct_useful: pct(c[0]),
                pct_not_useful: pct(c[1]),
                pct_unsure: pct(c[2]),
                n,
                n_useful: c[0],
                n_not_useful: c[1],
                n_unsure: c[2],
                n_underfilled: c[3],
                n_ties: c[4],
            }
        })
        .collect())
}

pub fn render_distribution(dists: &[UtilityDistribution]) -> String {
    let mut t = Table::new([
        "model", "dataset", "useful", "not_useful", "unsure", "n", "underfilled", "ties",
    ]);
    for d in dists {
        t.row([
            d.model_id.clone(),
            d.dataset.clone(),
            fmt_fixed(d.pct_useful, 2),
            fmt_fixed(d.pct_not_useful, 2),
            fmt_fixed(d.pct_unsure, 2),
            d.n.to_string(),
            d.n_underfilled.to_string(),
            d.n_ties.to_string(),
        ]);
    }
    t.render()
}

/// Fraction of outputs whose prediction equals the gold label.
pub fn task_accuracy(outputs: &[ModelOutput], instances: &[Instance]) -> Result<f64, UtilityError> {
    if outputs.is_empty() {
        return Err(UtilityError::NoOutputs);
    }
    let idx: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut correct = 0usize;
    for o in outputs {
        let inst = idx
            .get(o.instance_id.as_str())
            .ok_or_else(|| UtilityError::UnknownInstance(o.instance_id.clone()))?;
        correct += (o.predicted_label == inst.gold_label) as usize;
    }
    Ok(correct as f64 / outputs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationAccuracyCell {
    pub gen_type: GenType,
    pub utility_bucket: UtilityLabel,
    pub rationale_source: String,
    pub acc_before: f64,
    pub acc_after: f64,
    pub delta: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationReport {
    pub cells: Vec<GeneralizationAccuracyCell>,
    /// (gen question, rationale source) groups whose parent has no utility label.
    pub excluded_no_parent_label: usize,
    /// Groups whose gen question or parent instance is unknown.
    pub excluded_unknown_question: usize,
}

/// Human accuracy on generalization questions before and after seeing the
/// parent question's rationale, per (gen type, parent utility, rationale source).
pub fn generalization_accuracy_report(
    gen_annotations: &[GenAnnotationRecord],
    utility: &HashMap<(String, String), UtilityLabel>,
    gen_questions: &[GenQuestion],
    instances: &[Instance],
) -> Result<GeneralizationReport, UtilityError> {
    let gq: HashMap<&str, &GenQuestion> = gen_questions.iter().map(|g| (g.id.as_str(), g)).collect();
    let inst: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut groups: BTreeMap<(&str, &str), Vec<&GenAnnotationRecord>> = BTreeMap::new();
    for a in gen_annotations {
        groups
            .entry((a.gen_question_id.as_str(), a.model_id.as_str()))
            .or_default()
            .push(a);
    }
    // (gen_type, bucket, source) -> (n, correct_before, correct_after)
    let mut cells: BTreeMap<(GenType, UtilityLabel, String), (usize, usize, usize)> =
        BTreeMap::new();
    let mut excluded_no_parent_label = 0;
    let mut excluded_unknown_question = 0;
    for ((qid, source), anns) in groups {
        let Some(q) = gq.get(qid) else {
            excluded_unknown_question += 1;
            continue;
        };
        let Some(parent) = inst.get(q.parent_instance_id.as_str()) else {
            excluded_unknown_question += 1;
            continue;
        };
        let Some(&bucket) = utility.get(&(q.parent_instance_id.clone(), source.to_string())) else {
            excluded_no_parent_label += 1;
            continue;
        };
        let pre: Vec<Label> = anns.iter().map(|a| a.pre_answer.clone()).collect();
        let post: Vec<Label> = anns.iter().map(|a| a.post_answer.clone()).collect();
        let pre = majority_vote(&pre, &parent.choices)?;
        let post = majority_vote(&post, &parent.choices)?;
        let c = cells
            .entry((q.gen_type, bucket, source.to_string()))
            .or_default();
        c.0 += 1;
        c.1 += pre.is_correct(&q.gold_label) as usize;
        c.2 += post.is_correct(&q.gold_label) as usize;
    }
    Ok(GeneralizationReport {
        cells: cells
            .into_iter()
            .map(|((gen_type, utility_bucket, rationale_source), (n, b, a))| {
                let acc_before = b as f64 / n as f64;
                let acc_after = a as f64 / n as f64;
                GeneralizationAccuracyCell {
                    gen_type,
                    utility_bucket,
                    rationale_source,
                    acc_before,
                    acc_after,
                    delta: acc_after - acc_before,
                    n,
                }
            })
            .collect(),
        excluded_no_parent_label,
        excluded_unknown_question,
    })
}

pub fn render_generalization(report: &GeneralizationReport) -> String {
    let mut t = Table::new(["gen_type", "utility", "source", "before", "after", "delta", "n"]);
    for c in &report.cells {
        t.row([
            c.gen_type.to_string(),
            c.utility_bucket.to_string(),
            c.rationale_source.clone(),
            fmt_fixed(100.0 * c.acc_before, 2),
            fmt_fixed(100.0 * c.acc_after, 2),
            fmt_fixed(100.0 * c.delta, 2),
            c.n.to_string(),
        ]);
    }
    t.render()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{join_evaluation_rows, AnnotationRecord, Dataset};

    fn labels(xs: &[&str]) -> Vec<Label> {
        xs.iter().map(|s| Label::new(s)).collect()
    }

    #[test]
    fn vote_three_of_five() {
        let v = majority_vote(&labels(&["Yes", "Yes", "Yes", "No", "No"]), &labels(&["Yes", "No"]))
            .unwrap();
        assert_eq!(v.winner, Some("Yes".into()));
        assert!(!v.no_majority);
    }

    #[test]
    fn vote_tie_on_four_choices() {
        let v = majority_vote(
            &labels(&["A", "A", "B", "B", "C"]),
            &labels(&["A", "B", "C", "D"]),
        )
        .unwrap();
        assert!(v.no_majority);
        assert_eq!(v.winner, None);
    }

    #[test]
    fn vote_unanimous() {
        let v = majority_vote(&labels(&["No"; 5]), &labels(&["Yes", "No"])).unwrap();
        assert_eq!(v.winner, Some("No".into()));
        assert_eq!(v.counts.len(), 1);
        assert_eq!(v.counts[&Label::new("No")], 5);
    }

    #[test]
    fn vote_errors() {
        assert_eq!(
            majority_vote(&[], &labels(&["Yes", "No"])),
            Err(UtilityError::EmptyVote)
        );
        assert_eq!(
            majority_vote(&labels(&["Maybe"]), &labels(&["Yes", "No"])),
            Err(UtilityError::OutOfDomain("Maybe".into()))
        );
    }

    #[test]
    fn vote_normalizes_whitespace() {
        let v = majority_vote(&labels(&[" Yes", "Yes  "]), &labels(&["Yes", "No"])).unwrap();
        assert_eq!(v.counts[&Label::new("Yes")], 2);
    }

    fn vote(x: &str) -> VoteResult {
        majority_vote(&labels(&[x]), &labels(&["Yes", "No"])).unwrap()
    }

    #[test]
    fn classification_cases() {
        let gold = Label::new("Yes");
        assert_eq!(classify_utility(&vote("No"), &vote("Yes"), &gold), UtilityLabel::Useful);
        assert_eq!(classify_utility(&vote("Yes"), &vote("No"), &gold), UtilityLabel::NotUseful);
        assert_eq!(classify_utility(&vote("Yes"), &vote("Yes"), &gold), UtilityLabel::Unsure);
    }

    #[test]
    fn task_accuracy_counts() {
        let inst: Vec<Instance> = (0..3)
            .map(|i| Instance {
                id: format!("i{i}"),
                dataset: Dataset::Strategyqa,
                question: "?".into(),
                choices: labels(&["Yes", "No"]),
                gold_label: "Yes".into(),
                gold_rationale: String::new(),
            })
            .collect();
        let out = |i: usize, l: &str| ModelOutput {
            instance_id: format!("i{i}"),
            model_id: "m".into(),
            predicted_label: l.into(),
            rationale: String::new(),
            similarity_to_gold: None,
        };
        let all = vec![out(0, "Yes"), out(1, "Yes"), out(2, "Yes")];
        assert_eq!(task_accuracy(&all, &inst).unwrap(), 1.0);
        let none = vec![out(0, "No"), out(1, "No"), out(2, "No")];
        assert_eq!(task_accuracy(&none, &inst).unwrap(), 0.0);
        let two = vec![out(0, "Yes"), out(1, "No"), out(2, "Yes")];
        assert_eq!(task_accuracy(&two, &inst).unwrap(), 2.0 / 3.0);
        assert_eq!(task_accuracy(&[], &inst), Err(UtilityError::NoOutputs));
    }

    #[test]
    fn always_correct_is_all_unsure() {
        let inst: Vec<Instance> = (0..4)
            .map(|i| Instance {
                id: format!("i{i}"),
                dataset: Dataset::Obqa,
                question: "?".into(),
                choices: labels(&["a", "b", "c", "d"]),
                gold_label: "c".into(),
                gold_rationale: String::new(),
            })
            .collect();
        let outs: Vec<ModelOutput> = inst
            .iter()
            .map(|i| ModelOutput {
                instance_id: i.id.clone(),
                model_id: "m".into(),
                predicted_label: "a".into(),
                rationale: "r".into(),
                similarity_to_gold: None,
            })
            .collect();
        let anns: Vec<AnnotationRecord> = inst
            .iter()
            .flat_map(|i| {
                (0..5).map(move |w| AnnotationRecord {
                    instance_id: i.id.clone(),
                    model_id: "m".into(),
                    worker_id: format!("w{w}"),
                    pre_answer: "c".into(),
                    post_answer: "c".into(),
                })
            })
            .collect();
        let j = join_evaluation_rows(&inst, &outs, &anns);
        let pairs = classify_pairs(&j.rows, 5).unwrap();
        let d = utility_distribution(&pairs).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].pct_unsure, 100.0);
        assert_eq!(d[0].n, 4);
        assert_eq!(utility_distribution(&[]), Err(UtilityError::EmptyCorpus));
    }

    #[test]
    fn misleading_rationale_gives_negative_one_delta() {
        let parent = Instance {
            id: "p".into(),
            dataset: Dataset::Strategyqa,
            question: "?".into(),
            choices: labels(&["Yes", "No"]),
            gold_label: "Yes".into(),
            gold_rationale: "g".into(),
        };
        let gqs: Vec<GenQuestion> = (0..3)
            .map(|k| GenQuestion {
                id: format!("g{k}"),
                parent_instance_id: "p".into(),
                gen_type: GenType::Rephrase,
                question: "q".into(),
                gold_label: "Yes".into(),
                validated: true,
                validation_votes: 3,
            })
            .collect();
        let anns: Vec<GenAnnotationRecord> = gqs
            .iter()
            .flat_map(|g| {
                (0..3).map(move |w| GenAnnotationRecord {
                    gen_question_id: g.id.clone(),
                    model_id: "gpt3".into(),
                    worker_id: format!("w{w}"),
                    pre_answer: "Yes".into(),
                    post_answer: "No".into(),
                })
            })
            .collect();
        let mut util = HashMap::new();
        util.insert(("p".to_string(), "gpt3".to_string()), UtilityLabel::NotUseful);
        let r = generalization_accuracy_report(&anns, &util, &gqs, &[parent.clone()]).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].delta, -1.0);
        assert_eq!(r.cells[0].n, 3);

        // swapping before/after negates delta
        let swapped: Vec<_> = anns
            .iter()
            .map(|a| GenAnnotationRecord {
                pre_answer: a.post_answer.clone(),
                post_answer: a.pre_answer.clone(),
                ..a.clone()
            })
            .collect();
        let s = generalization_accuracy_report(&swapped, &util, &gqs, &[parent.clone()]).unwrap();
        assert_eq!(s.cells[0].delta, -r.cells[0].delta);

        let r = generalization_accuracy_report(&anns, &HashMap::new(), &gqs, &[parent]).unwrap();
        assert!(r.cells.is_empty());
        assert_eq!(r.excluded_no_parent_label, 3);
    }
}
