use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use rationale_utility::agreement::{krippendorff_alpha, ReliabilityMatrix};
use rationale_utility::assoc::{correlation_ratio, theils_u, ContingencyTable, GroupedValues, UDirection};
use rationale_utility::corpus::{parse_jsonl, write_jsonl, Dataset, GenType, Instance, Label};
use rationale_utility::genu::aggregate_genu;
use rationale_utility::prompts::{self, Demo, GenCandidate, Verdict};
use rationale_utility::quarkpool::{exploration_due, ExplorationConfig};
use rationale_utility::utility::majority_vote;

/// (unit, coder, category) triples on a small grid; duplicate cells are dropped.
fn ratings() -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    prop::collection::vec((0..8usize, 0..4usize, 0..3usize), 4..40).prop_map(|mut v| {
        let mut seen = std::collections::HashSet::new();
        v.retain(|(u, c, _)| seen.insert((*u, *c)));
        v
    })
}

fn matrix(r: &[(usize, usize, usize)], cat: impl Fn(usize) -> String, unit: impl Fn(usize) -> String) -> ReliabilityMatrix {
    ReliabilityMatrix::from_triples(r.iter().map(|&(u, c, v)| (unit(u), format!("c{c}"), cat(v))))
}

fn pairable_values(r: &[(usize, usize, usize)]) -> usize {
    let mut per: BTreeMap<usize, usize> = BTreeMap::new();
    for (u, _, _) in r {
        *per.entry(*u).or_default() += 1;
    }
    per.values().filter(|n| **n >= 2).sum()
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn alpha_ignores_category_names_and_order(r in ratings(), perm in permutation(3), order in any::<u64>()) {
        let names = ["x", "y", "z"];
        let a = krippendorff_alpha(&matrix(&r, |v| names[v].to_string(), |u| format!("u{u}")));
        let mut shuffled = r.clone();
        let k = shuffled.len();
        shuffled.rotate_left((order as usize) % k);
        let b = krippendorff_alpha(&matrix(&shuffled, |v| format!("cat-{}", perm[v]), |u| format!("unit{}", 7 - u)));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12, "{a} {b}"),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn alpha_duplication_relation(r in ratings()) {
        let m = matrix(&r, |v| v.to_string(), |u| format!("u{u}"));
        let Ok(a) = krippendorff_alpha(&m) else { return Ok(()) };
        prop_assume!((1.0 - a).abs() > 1e-9);
        let doubled: Vec<(String, String, String)> = r
            .iter()
            .flat_map(|&(u, c, v)| [(format!("u{u}"), format!("c{c}"), v.to_string()), (format!("d{u}"), format!("c{c}"), v.to_string())])
            .collect();
        let ad = krippendorff_alpha(&ReliabilityMatrix::from_triples(doubled)).unwrap();
        let n = pairable_values(&r) as f64;
        let ratio = (1.0 - ad) / (1.0 - a);
        prop_assert!((ratio - (2.0 * n - 1.0) / (2.0 * (n - 1.0))).abs() < 1e-9, "{ratio} n={n}");
    }

    #[test]
    fn theils_u_ignores_relabeling(
        counts in prop::collection::vec(prop::collection::vec(0u64..15, 3), 3),
        rp in permutation(3),
        cp in permutation(3),
    ) {
        let Ok(t) = ContingencyTable::from_counts(counts.clone()) else { return Ok(()) };
        let permuted: Vec<Vec<u64>> = rp.iter().map(|&i| cp.iter().map(|&j| counts[i][j]).collect()).collect();
        let p = ContingencyTable::from_counts(permuted).unwrap();
        for d in [UDirection::TargetGivenPredictor, UDirection::PredictorGivenTarget, UDirection::Symmetric] {
            match (theils_u(&t, d), theils_u(&p, d)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a - b).abs() < 1e-12);
                    prop_assert!((0.0..=1.0).contains(&a));
                }
                (a, b) => prop_assert_eq!(a, b),
            }
        }
        let tu = theils_u(&t, UDirection::TargetGivenPredictor);
        let tt = theils_u(&t.transpose(), UDirection::PredictorGivenTarget);
        if let (Ok(a), Ok(b)) = (tu, tt) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_affine_invariant(
        values in prop::collection::vec((0..4usize, -1e3f64..1e3), 2..60),
        a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        b in -1e3f64..1e3,
    ) {
        let g1 = GroupedValues::from_pairs(values.iter().map(|(g, v)| (format!("g{g}"), *v)));
        let g2 = GroupedValues::from_pairs(values.iter().map(|(g, v)| (format!("g{g}"), a * v + b)));
        let e1 = correlation_ratio(&g1).unwrap();
        let e2 = correlation_ratio(&g2).unwrap();
        prop_assert!((0.0..=1.0).contains(&e1.eta));
        if !e1.zero_variance && !e2.zero_variance {
            prop_assert!((e1.eta - e2.eta).abs() < 1e-9, "{} {}", e1.eta, e2.eta);
        }
    }

    #[test]
    fn majority_vote_ignores_order(votes in prop::collection::vec(0..3usize, 1..12), perm_seed in any::<u64>()) {
        let choices = [Label::new("A"), Label::new("B"), Label::new("C")];
        let answers: Vec<Label> = votes.iter().map(|v| choices[*v].clone()).collect();
        let mut shuffled = answers.clone();
        let k = shuffled.len();
        shuffled.rotate_right((perm_seed as usize) % k);
        shuffled.reverse();
        prop_assert_eq!(majority_vote(&answers, &choices).unwrap(), majority_vote(&shuffled, &choices).unwrap());
    }

    #[test]
    fn genu_aggregate_ignores_order(scores in prop::collection::vec(-1i8..=1, 1..15), rot in any::<usize>()) {
        let mut s2 = scores.clone();
        let k = s2.len();
        s2.rotate_left(rot % k);
        s2.reverse();
        let a = aggregate_genu(&scores).unwrap();
        let b = aggregate_genu(&s2).unwrap();
        prop_assert_eq!(a.genu, b.genu);
        prop_assert_eq!(a.tie_broken, b.tie_broken);
        prop_assert!(scores.contains(&a.genu));
    }

    #[test]
    fn demo_round_trip(values in prop::collection::vec("(?s).{0,40}", 4), g in 0..3usize) {
        let gen_type = GenType::ALL[g];
        let demo: Demo = prompts::layout(gen_type)
            .iter()
            .zip(&values)
            .map(|(f, v)| (f.to_string(), v.clone()))
            .collect();
        let text = prompts::serialize_demo(gen_type, &demo);
        prop_assert_eq!(prompts::parse_demo(gen_type, &text).unwrap(), demo);
    }

    #[test]
    fn demo_serialization_is_injective(a in prop::collection::vec("(?s).{0,12}", 3), b in prop::collection::vec("(?s).{0,12}", 3)) {
        let mk = |v: &[String]| -> Demo {
            prompts::layout(GenType::Rephrase).iter().zip(v).map(|(f, x)| (f.to_string(), x.clone())).collect()
        };
        let (da, db) = (mk(&a), mk(&b));
        let (sa, sb) = (prompts::serialize_demo(GenType::Rephrase, &da), prompts::serialize_demo(GenType::Rephrase, &db));
        prop_assert_eq!(sa == sb, da == db);
    }

    #[test]
    fn validation_ignores_verdict_order(
        verdicts in prop::collection::vec((any::<bool>(), prop::option::of(0..2usize)), 1..6),
        rot in any::<usize>(),
    ) {
        let cand = GenCandidate {
            id: "c1".into(),
            parent_instance_id: "p".into(),
            gen_type: GenType::SimilarReasoning,
            question: "Q?".into(),
            proposed_answer: None,
            raw_completion: String::new(),
        };
        let vs: Vec<Verdict> = verdicts
            .iter()
            .enumerate()
            .map(|(i, (valid, a))| Verdict {
                candidate_id: "c1".into(),
                validator_id: format!("v{i}"),
                valid: *valid,
                answer: a.map(|k| Label::new(["Yes", "No"][k])),
            })
            .collect();
        let mut shuffled = vs.clone();
        let k = shuffled.len();
        shuffled.rotate_left(rot % k);
        let a = prompts::record_validation(&cand, &vs);
        let b = prompts::record_validation(&cand, &shuffled);
        prop_assert_eq!(a.clone().map(|q| (q.gold_label, q.validation_votes)), b.map(|q| (q.gold_label, q.validation_votes)));
        if let Ok(q) = a {
            prop_assert!(2 * q.validation_votes as usize > vs.len());
        }
    }

    #[test]
    fn exploration_is_periodic(interval in 1u64..1000, step in 0u64..1_000_000) {
        let cfg = ExplorationConfig { interval_steps: interval, ..Default::default() };
        prop_assert_eq!(exploration_due(step, &cfg), step > 0 && step % interval == 0);
        prop_assert_eq!(exploration_due(step + interval, &cfg), step + interval > 0 && step % interval == 0);
    }

    #[test]
    fn instances_round_trip_through_jsonl(
        items in prop::collection::vec(("[a-z0-9]{1,8}", "\\PC{0,30}", any::<bool>(), 0..2usize), 1..10),
    ) {
        let instances: Vec<Instance> = items
            .iter()
            .enumerate()
            .map(|(i, (id, q, sqa, gold))| Instance {
                id: format!("{id}-{i}"),
                dataset: if *sqa { Dataset::Strategyqa } else { Dataset::Obqa },
                question: format!("{q}?"),
                choices: vec![Label::new("Yes"), Label::new("No")],
                gold_label: Label::new(["Yes", "No"][*gold]),
                gold_rationale: q.clone(),
            })
            .collect();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &instances).unwrap();
        let back: Vec<Instance> = parse_jsonl(buf.as_slice(), Path::new("mem")).unwrap();
        prop_assert_eq!(back, instances);
    }
}
