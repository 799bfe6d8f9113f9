use std::collections::HashMap;

use super::records::*;

/// One utility annotation together with the instance and model output it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationRow<'a> {
    pub instance: &'a Instance,
    pub output: &'a ModelOutput,
    pub annotation: &'a AnnotationRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinReport<'a> {
    pub rows: Vec<EvaluationRow<'a>>,
    pub excluded_missing_instance: usize,
    pub excluded_missing_output: usize,
}

/// Inner join on (instance_id, model_id), ordered by (instance_id, model_id, worker_id).
pub fn join_evaluation_rows<'a>(
    instances: &'a [Instance],
    outputs: &'a [ModelOutput],
    annotations: &'a [AnnotationRecord],
) -> JoinReport<'a> {
    let inst: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let outs: HashMap<(&str, &str), &ModelOutput> = outputs
        .iter()
        .map(|o| ((o.instance_id.as_str(), o.model_id.as_str()), o))
        .collect();
    let mut rows = Vec::with_capacity(annotations.len());
    let mut excluded_missing_instance = 0;
    let mut excluded_missing_output = 0;
    for a in annotations {
        let Some(instance) = inst.get(a.instance_id.as_str()) else {
            excluded_missing_instance += 1;
            continue;
        };
        let Some(output) = outs.get(&(a.instance_id.as_str(), a.model_id.as_str())) else {
            excluded_missing_output += 1;
            continue;
        };
        rows.push(EvaluationRow {
            instance,
            output,
            annotation: a,
        });
    }
    rows.sort_by(|x, y| {
        let kx = (
            &x.annotation.instance_id,
            &x.annotation.model_id,
            &x.annotation.worker_id,
        );
        let ky = (
            &y.annotation.instance_id,
            &y.annotation.model_id,
            &y.annotation.worker_id,
        );
        kx.cmp(&ky)
    });
    JoinReport {
        rows,
        excluded_missing_instance,
        excluded_missing_output,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Vec<Instance>, Vec<ModelOutput>, Vec<AnnotationRecord>) {
        let instances: Vec<Instance> = ["i1", "i2"]
            .iter()
            .map(|id| Instance {
                id: id.to_string(),
                dataset: Dataset::Strategyqa,
                question: "?".into(),
                choices: vec!["Yes".into(), "No".into()],
                gold_label: "No".into(),
                gold_rationale: String::new(),
            })
            .collect();
        let outputs = instances
            .iter()
            .map(|i| ModelOutput {
                instance_id: i.id.clone(),
                model_id: "gpt3".into(),
                predicted_label: "No".into(),
                rationale: "r".into(),
                similarity_to_gold: Some(0.5),
            })
            .collect();
        let annotations = instances
            .iter()
            .flat_map(|i| {
                (0..5).map(move |w| AnnotationRecord {
                    instance_id: i.id.clone(),
                    model_id: "gpt3".into(),
                    worker_id: format!("w{w}"),
                    pre_answer: "Yes".into(),
                    post_answer: "No".into(),
                })
            })
            .collect();
        (instances, outputs, annotations)
    }

    #[test]
    fn two_instances_five_workers() {
        let (i, o, a) = fixture();
        let r = join_evaluation_rows(&i, &o, &a);
        assert_eq!(r.rows.len(), 10);
    }

    #[test]
    fn annotation_without_output_excluded() {
        let (i, o, mut a) = fixture();
        let mut extra = a[0].clone();
        extra.model_id = "t5".into();
        a.push(extra);
        let r = join_evaluation_rows(&i, &o, &a);
        assert_eq!(r.rows.len(), 10);
        assert_eq!(r.excluded_missing_output, 1);
    }

    #[test]
    fn order_independent_of_input_order() {
        let (mut i, mut o, mut a) = fixture();
        let keys = |r: &JoinReport| {
            r.rows
                .iter()
                .map(|x| (x.annotation.instance_id.clone(), x.annotation.worker_id.clone()))
                .collect::<Vec<_>>()
        };
        let first = keys(&join_evaluation_rows(&i, &o, &a));
        i.reverse();
        o.reverse();
        a.reverse();
        a.swap(1, 7);
        assert_eq!(first, keys(&join_evaluation_rows(&i, &o, &a)));
    }
}
