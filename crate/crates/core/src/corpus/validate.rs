use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::records::*;
use super::{Corpus, RecordKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DanglingInstanceId,
    DanglingGenQuestionId,
    DuplicateKey,
    LabelDomain,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::DanglingInstanceId => "dangling instance_id",
            ViolationKind::DanglingGenQuestionId => "dangling gen_question_id",
            ViolationKind::DuplicateKey => "duplicate key",
            ViolationKind::LabelDomain => "label outside choice set",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub record_kind: String,
    pub key: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum Warning {
    /// Fewer annotators than the configured pool size for an (instance, model) pair.
    UnderfilledPool {
        instance_id: String,
        model_id: String,
        count: usize,
        required: usize,
    },
    /// Annotation with no model output for its (instance, model) pair.
    AnnotationWithoutOutput {
        instance_id: String,
        model_id: String,
        worker_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub clean: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
    /// Number of utility annotators per (instance_id, model_id).
    pub annotator_counts: BTreeMap<(String, String), usize>,
}

struct Collector {
    violations: Vec<Violation>,
}

impl Collector {
    fn push(&mut self, kind: ViolationKind, rk: RecordKind, key: String, detail: String) {
        self.violations.push(Violation {
            kind,
            record_kind: rk.name().to_string(),
            key,
            detail,
        });
    }

    fn domain(&mut self, rk: RecordKind, key: &str, inst: &Instance, field: &str, label: &Label) {
        if !inst.has_choice(label) {
            self.push(
                ViolationKind::LabelDomain,
                rk,
                key.to_string(),
                format!("{field} {:?} not in choices of {}", label.as_str(), inst.id),
            );
        }
    }
}

fn check_unique<K: std::hash::Hash + Eq>(
    seen: &mut HashSet<K>,
    k: K,
    c: &mut Collector,
    rk: RecordKind,
    key: &str,
) {
    if !seen.insert(k) {
        c.push(
            ViolationKind::DuplicateKey,
            rk,
            key.to_string(),
            "key appears more than once".to_string(),
        );
    }
}

/// Checks referential integrity and label domains across all collections.
/// `pool_size` is the expected number of utility annotators per (instance, model).
pub fn validate_corpus(corpus: &Corpus, pool_size: usize) -> ValidationReport {
    let mut c = Collector {
        violations: Vec::new(),
    };
    let mut instances: HashMap<&str, &Instance> = HashMap::new();
    for inst in &corpus.instances {
        if instances.insert(inst.id.as_str(), inst).is_some() {
            c.push(
                ViolationKind::DuplicateKey,
                RecordKind::Instances,
                inst.id.clone(),
                "duplicate instance id".into(),
            );
        }
    }

    let mut output_keys = HashSet::new();
    for o in &corpus.outputs {
        let key = format!("{}/{}", o.instance_id, o.model_id);
        check_unique(
            &mut output_keys,
            (o.instance_id.as_str(), o.model_id.as_str()),
            &mut c,
            RecordKind::ModelOutputs,
            &key,
        );
        match instances.get(o.instance_id.as_str()) {
            Some(inst) => c.domain(
                RecordKind::ModelOutputs,
                &key,
                inst,
                "predicted_label",
                &o.predicted_label,
            ),
            None => c.push(
                ViolationKind::DanglingInstanceId,
                RecordKind::ModelOutputs,
                key,
                format!("no instance {}", o.instance_id),
            ),
        }
    }

    let mut warnings = Vec::new();
    let mut annotation_keys = HashSet::new();
    let mut annotator_counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for a in &corpus.annotations {
        let key = format!("{}/{}/{}", a.instance_id, a.model_id, a.worker_id);
        check_unique(
            &mut annotation_keys,
            (
                a.instance_id.as_str(),
                a.model_id.as_str(),
                a.worker_id.as_str(),
            ),
            &mut c,
            RecordKind::Annotations,
            &key,
        );
        *annotator_counts
            .entry((a.instance_id.clone(), a.model_id.clone()))
            .or_default() += 1;
        match instances.get(a.instance_id.as_str()) {
            Some(inst) => {
                c.domain(RecordKind::Annotations, &key, inst, "pre_answer", &a.pre_answer);
                c.domain(RecordKind::Annotations, &key, inst, "post_answer", &a.post_answer);
            }
            None => c.push(
                ViolationKind::DanglingInstanceId,
                RecordKind::Annotations,
                key.clone(),
                format!("no instance {}", a.instance_id),
            ),
        }
        if !output_keys.contains(&(a.instance_id.as_str(), a.model_id.as_str())) {
            warnings.push(Warning::AnnotationWithoutOutput {
                instance_id: a.instance_id.clone(),
                model_id: a.model_id.clone(),
                worker_id: a.worker_id.clone(),
            });
        }
    }
    for ((instance_id, model_id), &count) in &annotator_counts {
        if count < pool_size {
            warnings.push(Warning::UnderfilledPool {
                instance_id: instance_id.clone(),
                model_id: model_id.clone(),
                count,
                required: pool_size,
            });
        }
    }

    let mut property_keys = HashSet::new();
    for p in &corpus.properties {
        let key = format!("{}/{}/{}", p.instance_id, p.model_id, p.worker_id);
        check_unique(
            &mut property_keys,
            (
                p.instance_id.as_str(),
                p.model_id.as_str(),
                p.worker_id.as_str(),
            ),
            &mut c,
            RecordKind::PropertyAnnotations,
            &key,
        );
        if !instances.contains_key(p.instance_id.as_str()) {
            c.push(
                ViolationKind::DanglingInstanceId,
                RecordKind::PropertyAnnotations,
                key,
                format!("no instance {}", p.instance_id),
            );
        }
    }

    let mut gen_parent: HashMap<&str, &Instance> = HashMap::new();
    let mut gen_ids = HashSet::new();
    for g in &corpus.gen_questions {
        check_unique(
            &mut gen_ids,
            g.id.as_str(),
            &mut c,
            RecordKind::GenQuestions,
            &g.id,
        );
        match instances.get(g.parent_instance_id.as_str()) {
            Some(inst) => {
                c.domain(RecordKind::GenQuestions, &g.id, inst, "gold_label", &g.gold_label);
                gen_parent.insert(g.id.as_str(), inst);
            }
            None => c.push(
                ViolationKind::DanglingInstanceId,
                RecordKind::GenQuestions,
                g.id.clone(),
                format!("no parent instance {}", g.parent_instance_id),
            ),
        }
    }

    let mut pred_keys = HashSet::new();
    for p in &corpus.oracle_predictions {
        let key = format!("{}/{}", p.gen_question_id, p.oracle_kind);
        check_unique(
            &mut pred_keys,
            (p.gen_question_id.as_str(), p.oracle_kind),
            &mut c,
            RecordKind::OraclePredictions,
            &key,
        );
        if gen_ids.contains(p.gen_question_id.as_str()) {
            if let Some(inst) = gen_parent.get(p.gen_question_id.as_str()) {
                c.domain(
                    RecordKind::OraclePredictions,
                    &key,
                    inst,
                    "predicted_label",
                    &p.predicted_label,
                );
            }
        } else {
            c.push(
                ViolationKind::DanglingGenQuestionId,
                RecordKind::OraclePredictions,
                key,
                format!("no gen question {}", p.gen_question_id),
            );
        }
    }

    let mut gen_ann_keys = HashSet::new();
    for a in &corpus.gen_annotations {
        let key = format!("{}/{}/{}", a.gen_question_id, a.model_id, a.worker_id);
        check_unique(
            &mut gen_ann_keys,
            (
                a.gen_question_id.as_str(),
                a.model_id.as_str(),
                a.worker_id.as_str(),
            ),
            &mut c,
            RecordKind::GenAnnotations,
            &key,
        );
        match gen_parent.get(a.gen_question_id.as_str()) {
            Some(inst) => {
                c.domain(RecordKind::GenAnnotations, &key, inst, "pre_answer", &a.pre_answer);
                c.domain(RecordKind::GenAnnotations, &key, inst, "post_answer", &a.post_answer);
            }
            None if !gen_ids.contains(a.gen_question_id.as_str()) => c.push(
                ViolationKind::DanglingGenQuestionId,
                RecordKind::GenAnnotations,
                key,
                format!("no gen question {}", a.gen_question_id),
            ),
            None => {}
        }
    }

    ValidationReport {
        clean: c.violations.is_empty(),
        violations: c.violations,
        warnings,
        annotator_counts,
    }
}
