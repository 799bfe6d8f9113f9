//! GEN-U: does a rationale help a predictor on related questions?
//!
//! Per generalization question, with gold `y`, the question-only prediction
//! `y_I`, and the question-plus-rationale prediction `y_IR`:
//! `-1` if `y_IR != y`, else `1` if `y_I != y`, else `0`. An instance's score is
//! the mode over its validated generalization questions, ties going to the
//! smallest tied value.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{theils_u, AssocError, ContingencyTable, UDirection};
use crate::corpus::{GenQuestion, Instance, Label, ModelOutput, OracleKind, OraclePrediction};
use crate::oracle::{map_bounded, Oracle, OracleError};
use crate::prompts::RationalizationTemplate;
use crate::report::{fmt_fixed, Table};
use crate::utility::UtilityLabel;

#[derive(Debug, Error)]
pub enum GenuError {
    #[error("no scores to aggregate")]
    Empty,
    #[error("score {0} is outside {{-1, 0, 1}}")]
    OutOfDomain(i64),
    #[error("no {kind} prediction for gen question {gen_question_id}")]
    MissingPrediction { gen_question_id: String, kind: OracleKind },
    #[error("oracle failed on gen question {gen_question_id}: {error}")]
    Oracle {
        gen_question_id: String,
        error: OracleError,
        /// Instances fully scored before the failure.
        partial: Box<GenuReport>,
    },
    #[error("no instance has both a GEN-U score and a utility label")]
    EmptyIntersection,
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

pub fn per_question_score(y_i: &Label, y_ir: &Label, gold: &Label) -> i8 {
    if y_ir != gold {
        -1
    } else if y_i != gold {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenuAggregate {
    pub genu: i8,
    pub tie_broken: bool,
}

/// Mode of the scores; on a tie the smallest tied value wins.
pub fn aggregate_genu(scores: &[i8]) -> Result<GenuAggregate, GenuError> {
    if scores.is_empty() {
        return Err(GenuError::Empty);
    }
    let mut counts = [0usize; 3];
    for &s in scores {
        if !(-1..=1).contains(&s) {
            return Err(GenuError::OutOfDomain(s as i64));
        }
        counts[(s + 1) as usize] += 1;
    }
    let top = *counts.iter().max().expect("three bins");
    let tied: Vec<usize> = (0..3).filter(|&i| counts[i] == top).collect();
    Ok(GenuAggregate {
        genu: tied[0] as i8 - 1,
        tie_broken: tied.len() > 1,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerQuestionScore {
    pub gen_question_id: String,
    pub score: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenUResult {
    pub instance_id: String,
    pub model_id: String,
    pub per_question: Vec<PerQuestionScore>,
    pub genu: i8,
    pub n_questions: usize,
    pub tie_broken: bool,
}

impl crate::corpus::Record for GenUResult {
    fn check(&self) -> Result<(), String> {
        if !(-1..=1).contains(&self.genu) {
            return Err(format!("genu {} is outside {{-1, 0, 1}}", self.genu));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenuReport {
    pub model_id: String,
    pub results: Vec<GenUResult>,
    /// Mean of per-instance scores.
    pub mean: Option<f64>,
    /// Instances with a rationale but no validated generalization question.
    pub skipped_no_questions: Vec<String>,
    /// Every prediction used, in (gen question, oracle) order.
    pub predictions: Vec<OraclePrediction>,
}

impl GenuReport {
    fn new(model_id: &str) -> Self {
        GenuReport {
            model_id: model_id.to_string(),
            results: Vec::new(),
            mean: None,
            skipped_no_questions: Vec::new(),
            predictions: Vec::new(),
        }
    }

    fn finish(&mut self) {
        self.mean = (!self.results.is_empty()).then(|| {
            self.results.iter().map(|r| r.genu as f64).sum::<f64>() / self.results.len() as f64
        });
    }
}

/// Where predictions come from.
pub enum PredictionSource<'a> {
    /// A previously recorded predictions file for one model's rationales.
    Offline(&'a [OraclePrediction]),
    Live {
        oracle_i: &'a dyn Oracle,
        oracle_ir: &'a dyn Oracle,
        max_in_flight: usize,
    },
}

#[derive(Debug, Clone, Default)]
pub struct GenuConfig {
    pub model_id: String,
    /// When set, oracle inputs go through this template's question slot.
    pub template: Option<RationalizationTemplate>,
}

/// The question-only input.
pub fn input_i(gq: &GenQuestion, parent: &Instance, template: Option<&RationalizationTemplate>) -> String {
    match template {
        Some(t) => t.render_input_with_question(parent, &gq.question),
        None => gq.question.clone(),
    }
}

/// The question-plus-rationale input: question, one space, rationale.
pub fn input_ir(
    gq: &GenQuestion,
    parent: &Instance,
    rationale: &str,
    template: Option<&RationalizationTemplate>,
) -> String {
    let q = format!("{} {}", gq.question, rationale);
    match template {
        Some(t) => t.render_input_with_question(parent, &q),
        None => q,
    }
}

fn score_group(instance_id: &str, model_id: &str, gqs: &[&GenQuestion], labels: &HashMap<(&str, OracleKind), Label>) -> GenUResult {
    let per_question: Vec<PerQuestionScore> = gqs
        .iter()
        .map(|g| PerQuestionScore {
            gen_question_id: g.id.clone(),
            score: per_question_score(
                &labels[&(g.id.as_str(), OracleKind::I)],
                &labels[&(g.id.as_str(), OracleKind::IR)],
                &g.gold_label,
            ),
        })
        .collect();
    let scores: Vec<i8> = per_question.iter().map(|p| p.score).collect();
    let agg = aggregate_genu(&scores).expect("non-empty, in domain");
    GenUResult {
        instance_id: instance_id.to_string(),
        model_id: model_id.to_string(),
        n_questions: per_question.len(),
        per_question,
        genu: agg.genu,
        tie_broken: agg.tie_broken,
    }
}

/// Scores every instance that has a rationale from `cfg.model_id`.
pub fn score_corpus(
    instances: &[Instance],
    outputs: &[ModelOutput],
    gen_questions: &[GenQuestion],
    source: &PredictionSource<'_>,
    cfg: &GenuConfig,
) -> Result<GenuReport, GenuError> {
    let inst: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut rationale: BTreeMap<&str, &str> = BTreeMap::new();
    for o in outputs.iter().filter(|o| o.model_id == cfg.model_id) {
        if inst.contains_key(o.instance_id.as_str()) {
            rationale.insert(o.instance_id.as_str(), o.rationale.as_str());
        }
    }
    let mut by_parent: BTreeMap<&str, Vec<&GenQuestion>> = BTreeMap::new();
    for g in gen_questions.iter().filter(|g| g.validated) {
        by_parent.entry(g.parent_instance_id.as_str()).or_default().push(g);
    }
    for v in by_parent.values_mut() {
        v.sort_by(|a, b| a.id.cmp(&b.id));
    }

    let mut report = GenuReport::new(&cfg.model_id);
    let mut groups: Vec<(&str, Vec<&GenQuestion>)> = Vec::new();
    for (&id, _) in &rationale {
        match by_parent.get(id) {
            Some(g) if !g.is_empty() => groups.push((id, g.clone())),
            _ => report.skipped_no_questions.push(id.to_string()),
        }
    }

    let mut labels: HashMap<(&str, OracleKind), Label> = HashMap::new();
    match source {
        PredictionSource::Offline(preds) => {
            let idx: HashMap<(&str, OracleKind), &Label> = preds
                .iter()
                .map(|p| ((p.gen_question_id.as_str(), p.oracle_kind), &p.predicted_label))
                .collect();
            for (_, gqs) in &groups {
                for g in gqs {
                    for kind in [OracleKind::I, OracleKind::IR] {
                        let l = idx.get(&(g.id.as_str(), kind)).ok_or_else(|| GenuError::MissingPrediction {
                            gen_question_id: g.id.clone(),
                            kind,
                        })?;
                        labels.insert((g.id.as_str(), kind), (*l).clone());
                    }
                }
            }
        }
        PredictionSource::Live {
            oracle_i,
            oracle_ir,
            max_in_flight,
        } => {
            let mut jobs: Vec<(&GenQuestion, OracleKind, String)> = Vec::new();
            for (id, gqs) in &groups {
                let parent = inst[id];
                for g in gqs {
                    jobs.push((g, OracleKind::I, input_i(g, parent, cfg.template.as_ref())));
                    jobs.push((g, OracleKind::IR, input_ir(g, parent, rationale[id], cfg.template.as_ref())));
                }
            }
            let answers = map_bounded(&jobs, *max_in_flight, |(_, kind, input)| match kind {
                OracleKind::I => oracle_i.predict(input),
                OracleKind::IR => oracle_ir.predict(input),
            });
            let mut failure = None;
            for ((g, kind, _), a) in jobs.iter().zip(answers) {
                match a {
                    Ok(p) => {
                        labels.insert((g.id.as_str(), *kind), Label::new(p.label));
                    }
                    Err(e) => {
                        failure.get_or_insert((g.id.clone(), e));
                    }
                }
            }
            if let Some((gen_question_id, error)) = failure {
                let mut partial = GenuReport::new(&cfg.model_id);
                for (id, gqs) in &groups {
                    let complete = gqs.iter().all(|g| {
                        labels.contains_key(&(g.id.as_str(), OracleKind::I))
                            && labels.contains_key(&(g.id.as_str(), OracleKind::IR))
                    });
                    if complete {
                        partial.results.push(score_group(id, &cfg.model_id, gqs, &labels));
                        push_predictions(&mut partial, gqs, &labels);
                    }
                }
                partial.finish();
                return Err(GenuError::Oracle {
                    gen_question_id,
                    error,
                    partial: Box::new(partial),
                });
            }
        }
    }

    for (id, gqs) in &groups {
        report.results.push(score_group(id, &cfg.model_id, gqs, &labels));
        push_predictions(&mut report, gqs, &labels);
    }
    report.finish();
    Ok(report)
}

fn push_predictions(report: &mut GenuReport, gqs: &[&GenQuestion], labels: &HashMap<(&str, OracleKind), Label>) {
    for g in gqs {
        for kind in [OracleKind::I, OracleKind::IR] {
            report.predictions.push(OraclePrediction {
                gen_question_id: g.id.clone(),
                oracle_kind: kind,
                predicted_label: labels[&(g.id.as_str(), kind)].clone(),
            });
        }
    }
}

/// GEN-U of one candidate rationale against live oracles, as an exploration reward.
pub fn score_rationale(
    parent: &Instance,
    rationale: &str,
    gen_questions: &[&GenQuestion],
    oracle_i: &dyn Oracle,
    oracle_ir: &dyn Oracle,
    template: Option<&RationalizationTemplate>,
) -> Result<i8, GenuError> {
    let mut scores = Vec::with_capacity(gen_questions.len());
    for g in gen_questions {
        let wrap = |error| GenuError::Oracle {
            gen_question_id: g.id.clone(),
            error,
            partial: Box::new(GenuReport::new("")),
        };
        let yi = oracle_i.predict(&input_i(g, parent, template)).map_err(wrap)?;
        let yir = oracle_ir.predict(&input_ir(g, parent, rationale, template)).map_err(wrap)?;
        scores.push(per_question_score(&Label::new(yi.label), &Label::new(yir.label), &g.gold_label));
    }
    Ok(aggregate_genu(&scores)?.genu)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenuCorrelation {
    /// U(utility | GEN-U).
    pub u: f64,
    pub n: usize,
    pub table: ContingencyTable,
}

/// Theil's U of utility given GEN-U over (instance, model) keys present in both.
pub fn correlate_genu_with_utility(
    results: &[GenUResult],
    utility: &HashMap<(String, String), UtilityLabel>,
) -> Result<GenuCorrelation, GenuError> {
    let pairs: Vec<(&str, String)> = results
        .iter()
        .filter_map(|r| {
            utility
                .get(&(r.instance_id.clone(), r.model_id.clone()))
                .map(|u| (u.as_str(), r.genu.to_string()))
        })
        .collect();
    if pairs.is_empty() {
        return Err(GenuError::EmptyIntersection);
    }
    let n = pairs.len();
    let table = ContingencyTable::from_pairs(pairs)?;
    let u = theils_u(&table, UDirection::TargetGivenPredictor)?;
    Ok(GenuCorrelation { u, n, table })
}

pub fn render_genu(report: &GenuReport) -> String {
    let mut t = Table::new(["instance", "genu", "questions", "tie"]);
    for r in &report.results {
        t.row([
            r.instance_id.clone(),
            r.genu.to_string(),
            r.n_questions.to_string(),
            if r.tie_broken { "yes".into() } else { String::new() },
        ]);
    }
    let mut s = t.render();
    s.push_str(&format!(
        "model {}: mean GEN-U over {} instances = {} (per-instance average); {} skipped without validated questions\n",
        report.model_id,
        report.results.len(),
        report.mean.map_or_else(|| "-".into(), |m| fmt_fixed(m, 3)),
        report.skipped_no_questions.len()
    ));
    s
}
